#include "fpsearch/minutiae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fpsearch/errors.hpp"
#include "fpsearch/io_util.hpp"

namespace fpsearch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Per-minutia contributions are snapped to multiples of 2^-40 before
// accumulation. Sums of such terms are exact in double for any realistic
// minutiae count (up to ~2^13 contributions per pixel), which makes the
// encoded map independent of both minutiae order and summation grouping.
constexpr double kTermScale = 1099511627776.0; // 2^40

double quantize_term(double v) {
    return std::nearbyint(v * kTermScale) / kTermScale;
}

} // namespace

void MinutiaeSet::validate() const {
    for (std::size_t i = 0; i < minutiae.size(); ++i) {
        const Minutia& m = minutiae[i];
        if (!std::isfinite(m.x) || !std::isfinite(m.y) || !std::isfinite(m.theta))
            throw InvalidInputError("minutia " + std::to_string(i) + " has non-finite fields");
        if (m.x < 0.0 || m.x >= width || m.y < 0.0 || m.y >= height)
            throw InvalidInputError("minutia " + std::to_string(i) + " outside frame (" +
                                    std::to_string(m.x) + "," + std::to_string(m.y) + ")");
        if (m.theta < 0.0 || m.theta >= kTwoPi)
            throw InvalidInputError("minutia " + std::to_string(i) + " orientation not in [0,2pi)");
    }
}

MinutiaeMap MinutiaeMap::operator+(const MinutiaeMap& other) const {
    if (width != other.width || height != other.height)
        throw InvalidInputError("map shapes differ");
    MinutiaeMap out = *this;
    for (std::size_t i = 0; i < values.size(); ++i)
        out.values[i] += other.values[i];
    return out;
}

double wrap_angle(double theta) {
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0)
        t += kTwoPi;
    if (t >= kTwoPi) // fmod can land exactly on 2*pi after the add
        t = 0.0;
    return t;
}

double orientation_diff(double a, double b) {
    double d = std::abs(a - b);
    d = std::fmod(d, kTwoPi);
    return d <= std::numbers::pi ? d : kTwoPi - d;
}

MinutiaeMap encode_map(const MinutiaeSet& set, int map_w, int map_h,
                       const MapEncodeOptions& opts) {
    if (map_w <= 0 || map_h <= 0)
        throw InvalidInputError("map dimensions must be positive");
    if (opts.sigma <= 0.0)
        throw InvalidInputError("sigma must be positive");
    set.validate();

    MinutiaeMap map;
    map.width = map_w;
    map.height = map_h;
    map.sigma = opts.sigma;
    map.values.assign(static_cast<std::size_t>(map_w) * map_h * MinutiaeMap::kChannels, 0.0);

    const double sx = set.width > 0.0 ? map_w / set.width : 1.0;
    const double sy = set.height > 0.0 ? map_h / set.height : 1.0;
    const double inv2s2 = 1.0 / (2.0 * opts.sigma * opts.sigma);
    const double radius = opts.cutoff_sigmas * opts.sigma;
    const double radius2 = radius * radius;

    for (const Minutia& m : set.minutiae) {
        const double mx = m.x * sx;
        const double my = m.y * sy;

        double orient[MinutiaeMap::kChannels];
        for (int k = 0; k < MinutiaeMap::kChannels; ++k) {
            double dphi = orientation_diff(m.theta, kTwoPi * k / 6.0);
            if (opts.squared_orientation)
                dphi *= dphi;
            orient[k] = std::exp(-dphi * inv2s2);
        }

        int x0 = std::max(0, static_cast<int>(std::ceil(mx - radius)));
        int x1 = std::min(map_w - 1, static_cast<int>(std::floor(mx + radius)));
        int y0 = std::max(0, static_cast<int>(std::ceil(my - radius)));
        int y1 = std::min(map_h - 1, static_cast<int>(std::floor(my + radius)));

        for (int py = y0; py <= y1; ++py) {
            double dy = my - py;
            for (int px = x0; px <= x1; ++px) {
                double dx = mx - px;
                double d2 = dx * dx + dy * dy;
                if (d2 > radius2)
                    continue;
                double spatial = std::exp(-d2 * inv2s2);
                double* cell = &map.at(py, px, 0);
                for (int k = 0; k < MinutiaeMap::kChannels; ++k)
                    cell[k] += quantize_term(spatial * orient[k]);
            }
        }
    }
    return map;
}

MinutiaeSet decode_map(const MinutiaeMap& map, const MapDecodeOptions& opts) {
    MinutiaeSet out;
    out.width = map.width;
    out.height = map.height;
    if (map.width <= 0 || map.height <= 0)
        return out;

    const int w = map.width, h = map.height;
    std::vector<double> summed(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = 0; k < MinutiaeMap::kChannels; ++k)
                s += map.at(y, x, k);
            summed[static_cast<std::size_t>(y) * w + x] = s;
        }

    struct Peak {
        int x, y;
        double value;
    };
    std::vector<Peak> peaks;
    auto sum_at = [&](int y, int x) { return summed[static_cast<std::size_t>(y) * w + x]; };
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = sum_at(y, x);
            if (v <= opts.peak_threshold)
                continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0)
                        continue;
                    int ny = y + dy, nx = x + dx;
                    if (ny < 0 || ny >= h || nx < 0 || nx >= w)
                        continue;
                    if (sum_at(ny, nx) > v) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max)
                peaks.push_back({x, y, v});
        }
    }

    // Strongest peaks win; scan order breaks exact ties so plateaus resolve
    // deterministically.
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.value > b.value; });

    std::vector<Peak> kept;
    const double r2 = opts.nms_radius * opts.nms_radius;
    for (const Peak& p : peaks) {
        bool suppressed = false;
        for (const Peak& q : kept) {
            double dx = p.x - q.x, dy = p.y - q.y;
            if (dx * dx + dy * dy < r2) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed)
            kept.push_back(p);
    }

    for (const Peak& p : kept) {
        double cs = 0.0, sn = 0.0;
        for (int k = 0; k < MinutiaeMap::kChannels; ++k) {
            double wgt = map.at(p.y, p.x, k);
            double angle = kTwoPi * k / 6.0;
            cs += wgt * std::cos(angle);
            sn += wgt * std::sin(angle);
        }
        double theta = (cs == 0.0 && sn == 0.0) ? 0.0 : wrap_angle(std::atan2(sn, cs));
        out.minutiae.push_back({static_cast<double>(p.x), static_cast<double>(p.y), theta});
    }
    return out;
}

MinutiaeSet scale_set(const MinutiaeSet& set, double to_w, double to_h) {
    if (to_w <= 0.0 || to_h <= 0.0)
        throw InvalidInputError("target dimensions must be positive");
    if (set.width <= 0.0 || set.height <= 0.0)
        throw InvalidInputError("source dimensions must be positive");
    MinutiaeSet out;
    out.width = to_w;
    out.height = to_h;
    out.minutiae.reserve(set.minutiae.size());
    const double sx = to_w / set.width;
    const double sy = to_h / set.height;
    for (const Minutia& m : set.minutiae)
        out.minutiae.push_back({m.x * sx, m.y * sy, m.theta});
    return out;
}

std::string set_to_text(const MinutiaeSet& set) {
    std::ostringstream os;
    os.precision(17);
    os << set.width << ' ' << set.height << ' ' << set.minutiae.size() << '\n';
    for (const Minutia& m : set.minutiae)
        os << m.x << ' ' << m.y << ' ' << m.theta << '\n';
    return os.str();
}

MinutiaeSet set_from_text(const std::string& text) {
    std::istringstream is(text);
    MinutiaeSet set;
    std::size_t n = 0;
    if (!(is >> set.width >> set.height >> n))
        throw ParseError(0, "minutiae set header must be \"w h n\"");
    set.minutiae.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(is >> set.minutiae[i].x >> set.minutiae[i].y >> set.minutiae[i].theta))
            throw ParseError(static_cast<std::size_t>(is.tellg() < 0 ? 0 : is.tellg()),
                             "truncated minutiae set: expected " + std::to_string(n) +
                                 " entries, failed at " + std::to_string(i));
    }
    return set;
}

void save_set(const MinutiaeSet& set, const std::string& path) {
    write_file_text(path, set_to_text(set));
}

MinutiaeSet load_set(const std::string& path) {
    return set_from_text(read_file_text(path));
}

void save_map(const MinutiaeMap& map, const std::string& path) {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.height));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.width));
    w.put<std::uint32_t>(MinutiaeMap::kChannels);
    w.put<float>(static_cast<float>(map.sigma));
    for (double v : map.values)
        w.put<float>(static_cast<float>(v));
    write_file_bytes(path, w.bytes());
}

MinutiaeMap load_map(const std::string& path) {
    auto bytes = read_file_bytes(path);
    ByteReader r(bytes.data(), bytes.size());
    MinutiaeMap map;
    map.height = static_cast<int>(r.get<std::uint32_t>());
    map.width = static_cast<int>(r.get<std::uint32_t>());
    auto channels = r.get<std::uint32_t>();
    if (channels != MinutiaeMap::kChannels)
        throw ParseError(8, "expected 6 channels, got " + std::to_string(channels));
    map.sigma = r.get<float>();
    std::size_t count = static_cast<std::size_t>(map.width) * map.height * MinutiaeMap::kChannels;
    map.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        map.values[i] = r.get<float>();
    if (!r.exhausted())
        throw ParseError(r.offset(), "trailing bytes after map data");
    return map;
}

} // namespace fpsearch
