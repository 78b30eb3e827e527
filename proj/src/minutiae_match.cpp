#include "fpsearch/minutiae_match.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <vector>

#include "fpsearch/errors.hpp"

namespace fpsearch {

namespace {

constexpr double kPi = std::numbers::pi;

// Signed angular difference wrapped into (-pi, pi].
double signed_angle_diff(double a, double b) {
    double d = std::fmod(a - b, 2.0 * kPi);
    if (d <= -kPi)
        d += 2.0 * kPi;
    else if (d > kPi)
        d -= 2.0 * kPi;
    return d;
}

struct Hypothesis {
    double rotation = 0.0;
    double tx = 0.0;
    double ty = 0.0;
};

struct Bin {
    int votes = 0;
    double cos_sum = 0.0, sin_sum = 0.0; // rotation averaged on the circle
    double tx_sum = 0.0, ty_sum = 0.0;
};

double evaluate_hypothesis(const MinutiaeSet& probe, const MinutiaeSet& gallery,
                           const Hypothesis& hyp, const MinutiaMatchConfig& cfg) {
    const double cx = probe.width / 2.0, cy = probe.height / 2.0;
    const double c = std::cos(hyp.rotation), s = std::sin(hyp.rotation);

    struct Pair {
        double dist, adiff;
        std::size_t i, j;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const Minutia& p = probe.minutiae[i];
        double rx = c * (p.x - cx) - s * (p.y - cy) + cx + hyp.tx;
        double ry = s * (p.x - cx) + c * (p.y - cy) + cy + hyp.ty;
        double rtheta = p.theta + hyp.rotation;
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            const Minutia& g = gallery.minutiae[j];
            double dx = rx - g.x, dy = ry - g.y;
            double dist = std::sqrt(dx * dx + dy * dy);
            if (dist > cfg.distance_tolerance)
                continue;
            double adiff = orientation_diff(rtheta, g.theta);
            if (adiff > cfg.angle_tolerance)
                continue;
            pairs.push_back({dist, adiff, i, j});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dist, a.adiff, a.i, a.j) < std::tie(b.dist, b.adiff, b.i, b.j);
    });

    std::vector<bool> used_p(probe.size(), false), used_g(gallery.size(), false);
    std::size_t matched = 0;
    for (const Pair& pr : pairs) {
        if (used_p[pr.i] || used_g[pr.j])
            continue;
        used_p[pr.i] = true;
        used_g[pr.j] = true;
        ++matched;
    }
    return 2.0 * static_cast<double>(matched) /
           static_cast<double>(probe.size() + gallery.size());
}

} // namespace

void MinutiaMatchConfig::validate() const {
    if (distance_tolerance <= 0.0 || angle_tolerance <= 0.0)
        throw InvalidInputError("match tolerances must be positive");
    if (rotation_steps < 1)
        throw InvalidInputError("rotation_steps must be >= 1");
    if (max_rotation < 0.0 || max_translation <= 0.0 || translation_bin <= 0.0 ||
        max_hypotheses < 1)
        throw InvalidInputError("invalid matcher configuration");
}

double minutiae_score(const MinutiaeSet& probe, const MinutiaeSet& gallery,
                      const MinutiaMatchConfig& cfg) {
    cfg.validate();
    if (probe.empty() || gallery.empty())
        return 0.0;

    const double cx = probe.width / 2.0, cy = probe.height / 2.0;
    const double rot_width = 2.0 * cfg.max_rotation / cfg.rotation_steps;

    // Vote: every minutia pair proposes "rotate probe by their orientation
    // difference about the probe center, then translate onto the gallery
    // minutia". Consistent pairs land in the same bin.
    std::map<std::tuple<int, int, int>, Bin> bins;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const Minutia& p = probe.minutiae[i];
        for (std::size_t j = 0; j < gallery.size(); ++j) {
            const Minutia& g = gallery.minutiae[j];
            double rot = signed_angle_diff(g.theta, p.theta);
            if (std::abs(rot) > cfg.max_rotation)
                continue;
            double c = std::cos(rot), s = std::sin(rot);
            double rx = c * (p.x - cx) - s * (p.y - cy) + cx;
            double ry = s * (p.x - cx) + c * (p.y - cy) + cy;
            double tx = g.x - rx, ty = g.y - ry;
            if (std::abs(tx) > cfg.max_translation || std::abs(ty) > cfg.max_translation)
                continue;

            int rbin = cfg.rotation_steps <= 1
                           ? 0
                           : std::clamp(static_cast<int>(std::floor((rot + cfg.max_rotation) / rot_width)),
                                        0, cfg.rotation_steps - 1);
            int xbin = static_cast<int>(std::floor(tx / cfg.translation_bin));
            int ybin = static_cast<int>(std::floor(ty / cfg.translation_bin));
            Bin& bin = bins[{rbin, xbin, ybin}];
            bin.votes += 1;
            bin.cos_sum += c;
            bin.sin_sum += s;
            bin.tx_sum += tx;
            bin.ty_sum += ty;
        }
    }
    if (bins.empty())
        return 0.0;

    std::vector<std::pair<std::tuple<int, int, int>, Bin>> ranked(bins.begin(), bins.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.votes != b.second.votes)
            return a.second.votes > b.second.votes;
        return a.first < b.first; // deterministic order on equal votes
    });

    double best = 0.0;
    int evaluated = 0;
    for (const auto& [key, bin] : ranked) {
        if (evaluated++ >= cfg.max_hypotheses)
            break;
        Hypothesis hyp;
        hyp.rotation = std::atan2(bin.sin_sum, bin.cos_sum);
        hyp.tx = bin.tx_sum / bin.votes;
        hyp.ty = bin.ty_sum / bin.votes;
        best = std::max(best, evaluate_hypothesis(probe, gallery, hyp, cfg));
    }
    return best;
}

} // namespace fpsearch
