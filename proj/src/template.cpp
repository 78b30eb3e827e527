#include "fpsearch/template.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "fpsearch/errors.hpp"

namespace fpsearch {

namespace {

// Reconstructions whose squared norm falls below this are treated as the
// zero vector and decompress to the uniform unit vector.
constexpr double kZeroNormGuard = 1e-30;

double squared_norm(std::span<const float> values) {
    double s = 0.0;
    for (float v : values)
        s += static_cast<double>(v) * static_cast<double>(v);
    return s;
}

void check_finite(std::span<const float> values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i]))
            throw InvalidInputError("template feature " + std::to_string(i) + " is not finite");
    }
}

} // namespace

Template Template::from_features(std::span<const float> values) {
    if (values.size() != kTemplateDim)
        throw InvalidInputError("expected " + std::to_string(kTemplateDim) + " features, got " +
                                std::to_string(values.size()));
    check_finite(values);
    double n2 = squared_norm(values);
    if (std::abs(std::sqrt(n2) - 1.0) > 1e-6)
        throw InvalidInputError("template is not unit length (norm = " +
                                std::to_string(std::sqrt(n2)) + ")");
    Template t;
    std::copy(values.begin(), values.end(), t.features.begin());
    return t;
}

Template Template::normalized(std::span<const float> values) {
    if (values.size() != kTemplateDim)
        throw InvalidInputError("expected " + std::to_string(kTemplateDim) + " features, got " +
                                std::to_string(values.size()));
    check_finite(values);
    double n2 = squared_norm(values);
    if (n2 < kZeroNormGuard)
        throw InvalidInputError("cannot normalize a zero vector");
    double inv = 1.0 / std::sqrt(n2);
    Template t;
    for (std::size_t i = 0; i < kTemplateDim; ++i)
        t.features[i] = static_cast<float>(values[i] * inv);
    return t;
}

std::array<std::uint8_t, kCompressedTemplateBytes> CompressedTemplate::serialize() const {
    std::array<std::uint8_t, kCompressedTemplateBytes> out;
    std::memcpy(out.data(), codes.data(), kTemplateDim);
    std::memcpy(out.data() + kTemplateDim, &lo, sizeof(float));
    std::memcpy(out.data() + kTemplateDim + sizeof(float), &hi, sizeof(float));
    return out;
}

CompressedTemplate CompressedTemplate::deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kCompressedTemplateBytes)
        throw ParseError(bytes.size(), "compressed template must be exactly " +
                                           std::to_string(kCompressedTemplateBytes) + " bytes");
    CompressedTemplate c;
    std::memcpy(c.codes.data(), bytes.data(), kTemplateDim);
    std::memcpy(&c.lo, bytes.data() + kTemplateDim, sizeof(float));
    std::memcpy(&c.hi, bytes.data() + kTemplateDim + sizeof(float), sizeof(float));
    if (!std::isfinite(c.lo) || !std::isfinite(c.hi) || c.lo > c.hi)
        throw ParseError(kTemplateDim, "compressed template scalars invalid (lo > hi or non-finite)");
    return c;
}

CompressedTemplate compress(const Template& t) {
    check_finite(t.features);
    auto [lo_it, hi_it] = std::minmax_element(t.features.begin(), t.features.end());
    float lo = *lo_it, hi = *hi_it;
    CompressedTemplate c;
    c.lo = lo;
    c.hi = hi;
    if (hi == lo) {
        c.codes.fill(0); // constant vector: the scale is zero, keep all codes 0
        return c;
    }
    double range = static_cast<double>(hi) - static_cast<double>(lo);
    for (std::size_t i = 0; i < kTemplateDim; ++i) {
        double scaled = std::floor(255.0 * (static_cast<double>(t.features[i]) - lo) / range);
        c.codes[i] = static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
    }
    return c;
}

Template decompress(const CompressedTemplate& c) {
    double lo = c.lo;
    double step = (static_cast<double>(c.hi) - lo) / 255.0;
    std::array<double, kTemplateDim> raw;
    double n2 = 0.0;
    for (std::size_t i = 0; i < kTemplateDim; ++i) {
        double v = lo + static_cast<double>(c.codes[i]) * step;
        raw[i] = v;
        n2 += v * v;
    }
    Template t;
    if (n2 < kZeroNormGuard) {
        // All-zero reconstruction: no direction to recover, return the
        // uniform unit vector so downstream scoring stays finite.
        float u = static_cast<float>(1.0 / std::sqrt(static_cast<double>(kTemplateDim)));
        t.features.fill(u);
        return t;
    }
    double inv = 1.0 / std::sqrt(n2);
    for (std::size_t i = 0; i < kTemplateDim; ++i)
        t.features[i] = static_cast<float>(raw[i] * inv);
    return t;
}

double dot192(const float* a, const float* b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < kTemplateDim; ++i)
        acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

MatchScore cosine_score(const Template& probe, const Template& gallery) {
    // Bitwise-identical inputs score exactly 1.0; the accumulated self dot
    // product of a float unit vector may land a few ulp away.
    if (std::memcmp(probe.data(), gallery.data(), sizeof(probe.features)) == 0)
        return {1.0, ScoreTag::kCosine};
    double v = dot192(probe.data(), gallery.data());
    return {std::clamp(v, -1.0, 1.0), ScoreTag::kCosine};
}

MatchScore integer_score(const CompressedTemplate& probe, const CompressedTemplate& gallery) {
    // Expand dot(decompress(p), decompress(g)) algebraically. With
    // p[i] = lo_p + a*cp[i] and g[i] = lo_g + b*cg[i]:
    //   dot   = d*lo_p*lo_g + lo_p*b*S(cg) + lo_g*a*S(cp) + a*b*S(cp*cg)
    //   |p|^2 = d*lo_p^2 + 2*lo_p*a*S(cp) + a^2*S(cp^2)
    // where the S(.) sums are exact integer sums over the byte codes.
    std::int64_t sp = 0, sg = 0, spp = 0, sgg = 0, spg = 0;
    for (std::size_t i = 0; i < kTemplateDim; ++i) {
        std::int64_t cp = probe.codes[i];
        std::int64_t cg = gallery.codes[i];
        sp += cp;
        sg += cg;
        spp += cp * cp;
        sgg += cg * cg;
        spg += cp * cg;
    }
    constexpr double d = static_cast<double>(kTemplateDim);
    double lo_p = probe.lo, lo_g = gallery.lo;
    double a = (static_cast<double>(probe.hi) - lo_p) / 255.0;
    double b = (static_cast<double>(gallery.hi) - lo_g) / 255.0;

    double dot = d * lo_p * lo_g + lo_p * b * static_cast<double>(sg) +
                 lo_g * a * static_cast<double>(sp) + a * b * static_cast<double>(spg);
    double np2 = d * lo_p * lo_p + 2.0 * lo_p * a * static_cast<double>(sp) +
                 a * a * static_cast<double>(spp);
    double ng2 = d * lo_g * lo_g + 2.0 * lo_g * b * static_cast<double>(sg) +
                 b * b * static_cast<double>(sgg);

    if (np2 < 1e-30 || ng2 < 1e-30) {
        // Degenerate zero reconstruction: defer to the decompression path,
        // which substitutes the uniform unit vector.
        return cosine_score(decompress(probe), decompress(gallery));
    }
    double v = dot / (std::sqrt(np2) * std::sqrt(ng2));
    return {std::clamp(v, -1.0, 1.0), ScoreTag::kCosine};
}

} // namespace fpsearch
