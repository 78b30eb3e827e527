#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fpsearch {

/// Dimensionality of the fixed-length fingerprint representation.
inline constexpr std::size_t kTemplateDim = 192;

/// Serialized size of a compressed template: 192 one-byte codes plus two
/// 4-byte float scalars.
inline constexpr std::size_t kCompressedTemplateBytes = kTemplateDim + 2 * sizeof(float);

/// Fixed-length fingerprint template: a unit-length 192-d embedding.
struct Template {
    std::array<float, kTemplateDim> features{};

    /// Builds a template from raw features, validating finiteness and unit
    /// norm (within 1e-6). Throws InvalidInputError otherwise.
    static Template from_features(std::span<const float> values);

    /// Builds a template by scaling arbitrary finite features to unit norm.
    /// Throws InvalidInputError on non-finite input or a zero vector.
    static Template normalized(std::span<const float> values);

    const float* data() const noexcept { return features.data(); }
    float* data() noexcept { return features.data(); }
};

/// 8-bit min-max quantization of a Template: one byte per feature plus the
/// stored minimum and maximum, 200 bytes serialized.
struct CompressedTemplate {
    std::array<std::uint8_t, kTemplateDim> codes{};
    float lo = 0.0f; // min of the source features
    float hi = 0.0f; // max of the source features

    std::array<std::uint8_t, kCompressedTemplateBytes> serialize() const;
    static CompressedTemplate deserialize(std::span<const std::uint8_t> bytes);
};

enum class ScoreTag : std::uint8_t {
    kCosine,
    kPqDistance,
    kFused,
};

struct MatchScore {
    double value = 0.0;
    ScoreTag tag = ScoreTag::kCosine;
};

/// Quantizes a template to one byte per feature via min-max normalization:
/// codes[i] = floor(255 * (t[i] - min) / (max - min)). A constant vector
/// (max == min) yields all-zero codes.
CompressedTemplate compress(const Template& t);

/// Reverses the min-max normalization and rescales the result to unit
/// length. A degenerate all-zero reconstruction decompresses to the uniform
/// unit vector.
Template decompress(const CompressedTemplate& c);

/// Cosine similarity of two unit-length templates: the 192-term dot product,
/// accumulated in double and clamped to [-1, 1].
MatchScore cosine_score(const Template& probe, const Template& gallery);

/// Cosine similarity computed directly from the integer codes and the four
/// compression scalars, without materializing the decompressed vectors. The
/// data-dependent part reduces to integer sums of code products, so the whole
/// match is additions and multiplications over integers plus a fixed number
/// of scalar operations. Agrees with cosine_score over decompress to 1e-6.
MatchScore integer_score(const CompressedTemplate& probe, const CompressedTemplate& gallery);

/// Dot product of two 192-d float rows with double accumulation. Shared by
/// every cosine-scoring path so that exact ties are consistent across them.
double dot192(const float* a, const float* b) noexcept;

} // namespace fpsearch
