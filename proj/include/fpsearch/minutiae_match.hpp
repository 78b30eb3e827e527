#pragma once

#include <numbers>

#include "fpsearch/minutiae.hpp"

namespace fpsearch {

/// Tunables for the pairwise minutiae matcher. Tolerances are in the
/// coordinate frame the sets live in.
struct MinutiaMatchConfig {
    double distance_tolerance = 12.0;          // px
    double angle_tolerance = std::numbers::pi / 9.0; // 20 degrees
    int rotation_steps = 13;                   // vote bins across the rotation range
    double max_rotation = std::numbers::pi / 3.0;    // hypothesis grid covers +/- this
    double max_translation = 224.0;            // px, per axis
    double translation_bin = 16.0;             // px, vote bin size
    int max_hypotheses = 12;                   // top vote bins evaluated

    void validate() const;
};

/// Pairwise minutiae similarity in [0, 1].
///
/// Minutia-pair correspondences vote for rigid alignment hypotheses on a
/// discretized rotation/translation grid; the strongest bins are evaluated by
/// transforming the probe set (rotation about the probe frame's center) and
/// greedily pairing minutiae one-to-one within the distance and angle
/// tolerances. The score of a hypothesis is 2*|pairs| / (|p| + |g|); the
/// result is the maximum over evaluated hypotheses. Deterministic for fixed
/// config; identical sets score 1.0; an empty set scores 0.
double minutiae_score(const MinutiaeSet& probe, const MinutiaeSet& gallery,
                      const MinutiaMatchConfig& cfg = {});

} // namespace fpsearch
