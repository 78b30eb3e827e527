#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fpsearch {

/// One ridge ending or bifurcation: position in pixels, orientation in
/// radians wrapped to [0, 2*pi).
struct Minutia {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

/// Ordered list of minutiae together with the pixel frame they live in.
struct MinutiaeSet {
    std::vector<Minutia> minutiae;
    double width = 0.0;
    double height = 0.0;

    std::size_t size() const noexcept { return minutiae.size(); }
    bool empty() const noexcept { return minutiae.empty(); }

    /// Throws InvalidInputError if any member lies outside [0,w) x [0,h) or
    /// carries a non-finite field.
    void validate() const;
};

/// 6-channel heatmap of minutiae positions and orientations. Channel k is
/// centered at angle 2*k*pi/6. Values are stored row-major as
/// [height][width][6].
struct MinutiaeMap {
    std::vector<double> values;
    int width = 0;
    int height = 0;
    double sigma = 1.5; // gaussian width, in map pixels

    static constexpr int kChannels = 6;

    double at(int y, int x, int k) const {
        return values[(static_cast<std::size_t>(y) * width + x) * kChannels + k];
    }
    double& at(int y, int x, int k) {
        return values[(static_cast<std::size_t>(y) * width + x) * kChannels + k];
    }

    /// Elementwise sum of two maps of identical shape.
    MinutiaeMap operator+(const MinutiaeMap& other) const;
};

/// Smallest absolute difference between two angles, in [0, pi]:
/// |a-b| when a-b is within [-pi, pi], otherwise 2*pi - |a-b|.
double orientation_diff(double a, double b);

/// Wraps an angle into [0, 2*pi).
double wrap_angle(double theta);

struct MapEncodeOptions {
    double sigma = 1.5;
    /// The orientation contribution divides the raw angle difference by
    /// 2*sigma^2. Set this to divide its square instead, which matches the
    /// spatial term's form.
    bool squared_orientation = false;
    /// Contributions are dropped beyond this many sigmas from the minutia;
    /// each dropped term is below exp(-8).
    double cutoff_sigmas = 4.0;
};

/// Rasterizes a minutiae set into a 6-channel heatmap. The set's coordinates
/// are scaled from its own frame to the map grid by map_w/w and map_h/h.
/// Each pixel accumulates, per channel, the product of a spatial gaussian
/// exp(-dist^2 / (2*sigma^2)) and an orientation falloff
/// exp(-dphi / (2*sigma^2)) summed over minutiae.
MinutiaeMap encode_map(const MinutiaeSet& set, int map_w, int map_h,
                       const MapEncodeOptions& opts = {});

struct MapDecodeOptions {
    double peak_threshold = 0.25;
    double nms_radius = 3.0; // map pixels
};

/// Recovers a minutiae set from a heatmap: local maxima of the channel-summed
/// map above the threshold, pruned so no two survivors are closer than
/// nms_radius, each assigned the circular weighted mean of the channel center
/// angles weighted by the channel values at the peak. The output set lives in
/// the map's pixel frame.
MinutiaeSet decode_map(const MinutiaeMap& map, const MapDecodeOptions& opts = {});

/// Rescales coordinates linearly per axis into a new frame; angles unchanged.
MinutiaeSet scale_set(const MinutiaeSet& set, double to_w, double to_h);

/// Text round trip: header line "w h n" followed by n lines "x y theta".
std::string set_to_text(const MinutiaeSet& set);
MinutiaeSet set_from_text(const std::string& text);
void save_set(const MinutiaeSet& set, const std::string& path);
MinutiaeSet load_set(const std::string& path);

/// Binary round trip: u32 height, u32 width, u32 channels, f32 sigma header,
/// then row-major 4-byte little-endian floats.
void save_map(const MinutiaeMap& map, const std::string& path);
MinutiaeMap load_map(const std::string& path);

} // namespace fpsearch
