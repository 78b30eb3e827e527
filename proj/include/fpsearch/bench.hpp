#pragma once

#include <string>

#include "fpsearch/synth.hpp"

namespace fpsearch {

/// A named experiment: generator/config settings, seed, and expected metric
/// bounds with tolerances, loaded from a JSON manifest. Supported kinds are
/// "compression" (raw vs compressed-gallery ranking), "pq_recall" (PQ top-1
/// recall and rank-1 drop against exact search), "rerank_gain" (two-stage
/// rank-1 against stage-1) and "fusion_verify" (fused vs single-scorer TAR).
struct ExperimentManifest {
    std::string name;
    std::string kind;
    std::uint64_t seed = 1;
    SynthConfig synth;
    std::size_t k = 20;          // candidate depth / CMC depth
    PqParams pq;                 // pq_recall
    FusionConfig fusion;         // rerank_gain
    double far_target = 1e-3;    // fusion_verify
    std::string notes;
    /// Metric name -> {min, max} acceptance bounds (either side optional).
    struct Bound {
        bool has_min = false, has_max = false;
        double min = 0.0, max = 0.0;
    };
    std::map<std::string, Bound> expected;

    static ExperimentManifest from_json_text(const std::string& text);
    static ExperimentManifest load(const std::string& path);
};

struct ExperimentResult {
    bool passed = true;
    std::map<std::string, double> metrics;
    std::string report_json;
};

/// Runs the experiment, checks every expected bound and renders an
/// observed-vs-expected table to stdout-ready text inside report_json.
ExperimentResult run_experiment(const ExperimentManifest& manifest, int threads = 0);

} // namespace fpsearch
