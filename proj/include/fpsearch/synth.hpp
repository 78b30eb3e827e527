#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fpsearch/gallery.hpp"
#include "fpsearch/rerank.hpp"
#include "fpsearch/search.hpp"

namespace fpsearch {

/// Knobs for the synthetic identity/impression generator. Each identity gets
/// a random unit anchor vector and a base minutiae set; each impression
/// perturbs both. noise_sigma is the expected embedding noise norm relative
/// to the unit anchor, so it directly controls the genuine score level
/// (E[cosine] is about 1/(1+sigma^2)).
struct SynthConfig {
    std::size_t identities = 1000;
    int impressions_per_identity = 2; // >= 2: one enrolled, the rest probe
    double noise_sigma = 0.35;
    std::pair<int, int> minutiae_count_range{16, 48};
    double minutiae_jitter_sigma = 3.0; // px, per-impression position jitter
    double minutiae_drop_prob = 0.15;   // per-minutia dropout; spurious adds match the expected count
    double image_w = 448.0;
    double image_h = 448.0;
    bool with_minutiae = true;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SynthProbe {
    Template tpl;
    MinutiaeSet minutiae;
    std::string subject_id;
    int finger_index = 0;
};

/// Generated benchmark data. The gallery stores compressed templates (with
/// minutiae when configured); raw_templates keeps the pre-compression floats
/// of the same records for compression-effect comparisons.
struct SynthData {
    Gallery gallery;
    TemplateMatrix raw_templates;
    std::vector<SynthProbe> probes;
};

SynthData generate(const SynthConfig& cfg);

enum class EvalBackend : std::uint8_t { kExact, kPq, kRerank };

struct EvalConfig {
    EvalBackend backend = EvalBackend::kExact;
    std::size_t cmc_max_rank = 20;
    int threads = 0;
    FusionConfig fusion;   // used by kRerank
    const PqIndex* index = nullptr; // used by kPq / kRerank-over-PQ
    /// Verification sampling for TAR@FAR: every probe scored against its
    /// mate (genuine) plus this many non-mates (imposters), deterministic.
    std::size_t imposters_per_probe = 20;
    std::vector<double> far_targets{1e-2, 1e-3};
    std::uint64_t pair_seed = 99;
};

struct LatencyStats {
    double mean_ms = 0.0;
    double p99_ms = 0.0;
};

struct EvalReport {
    std::vector<double> cmc; // cmc[r-1] = fraction of probes with mate in top r
    std::map<double, double> tar_at_far;
    LatencyStats latency;
    std::size_t probes_evaluated = 0;
    std::size_t probes_excluded = 0; // ground-truth key missing from gallery

    double rank1() const { return cmc.empty() ? 0.0 : cmc.front(); }
    std::string to_json() const;
};

/// Closed-set identification + verification sweep over the probes.
/// Rank-k accuracy comes from per-probe search with the configured backend;
/// TAR@FAR from a threshold sweep over sampled genuine/imposter cosine (or
/// fused) scores; latency is wall time of the per-probe search call.
EvalReport evaluate(const SynthData& data, const EvalConfig& cfg);

/// Threshold sweep: TAR at the threshold achieving the target FAR on the
/// given imposter scores (accept when score >= the a-th largest imposter
/// score, a = floor(FAR * |imposters|); strictly above the maximum when a=0).
double tar_at_far(const std::vector<double>& genuine, const std::vector<double>& imposter,
                  double far);

} // namespace fpsearch
