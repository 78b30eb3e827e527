#include "fpsearch/synth.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include <json.hpp>

#include "fpsearch/errors.hpp"

namespace fpsearch {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::array<float, kTemplateDim> random_unit_vector(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<double, kTemplateDim> v;
    double n2 = 0.0;
    for (auto& x : v) {
        x = gauss(rng);
        n2 += x * x;
    }
    double inv = 1.0 / std::sqrt(n2);
    std::array<float, kTemplateDim> out;
    for (std::size_t i = 0; i < kTemplateDim; ++i)
        out[i] = static_cast<float>(v[i] * inv);
    return out;
}

Template perturbed_impression(const std::array<float, kTemplateDim>& anchor, double sigma,
                              std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::array<float, kTemplateDim> v;
    // Per-component std sigma/sqrt(d) puts the expected noise norm at sigma.
    double scale = sigma / std::sqrt(static_cast<double>(kTemplateDim));
    for (std::size_t i = 0; i < kTemplateDim; ++i)
        v[i] = static_cast<float>(anchor[i] + scale * gauss(rng));
    return Template::normalized(v);
}

MinutiaeSet random_base_set(const SynthConfig& cfg, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> count(cfg.minutiae_count_range.first,
                                             cfg.minutiae_count_range.second);
    // Keep a margin so jittered copies stay in frame.
    double margin = 4.0 * cfg.minutiae_jitter_sigma + 1.0;
    std::uniform_real_distribution<double> ux(margin, cfg.image_w - margin);
    std::uniform_real_distribution<double> uy(margin, cfg.image_h - margin);
    std::uniform_real_distribution<double> ut(0.0, kTwoPi);
    MinutiaeSet set;
    set.width = cfg.image_w;
    set.height = cfg.image_h;
    int n = count(rng);
    set.minutiae.reserve(n);
    for (int i = 0; i < n; ++i)
        set.minutiae.push_back({ux(rng), uy(rng), wrap_angle(ut(rng))});
    return set;
}

MinutiaeSet perturbed_set(const MinutiaeSet& base, const SynthConfig& cfg, std::mt19937_64& rng) {
    std::normal_distribution<double> jitter(0.0, cfg.minutiae_jitter_sigma);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ux(0.0, cfg.image_w);
    std::uniform_real_distribution<double> uy(0.0, cfg.image_h);
    std::uniform_real_distribution<double> ut(0.0, kTwoPi);

    MinutiaeSet out;
    out.width = base.width;
    out.height = base.height;
    for (const Minutia& m : base.minutiae) {
        if (u01(rng) < cfg.minutiae_drop_prob)
            continue;
        double x = std::clamp(m.x + jitter(rng), 0.0, base.width * (1.0 - 1e-9));
        double y = std::clamp(m.y + jitter(rng), 0.0, base.height * (1.0 - 1e-9));
        out.minutiae.push_back({x, y, m.theta});
    }
    // Spurious detections: expected count matches the expected drops.
    int spurious = 0;
    double expected = cfg.minutiae_drop_prob * static_cast<double>(base.size());
    while (expected >= 1.0) {
        ++spurious;
        expected -= 1.0;
    }
    if (u01(rng) < expected)
        ++spurious;
    for (int i = 0; i < spurious; ++i)
        out.minutiae.push_back({ux(rng) * (1.0 - 1e-9), uy(rng) * (1.0 - 1e-9), wrap_angle(ut(rng))});
    return out;
}

} // namespace

void SynthConfig::validate() const {
    if (identities == 0 || impressions_per_identity < 1)
        throw InvalidInputError("identity and impression counts must be positive");
    if (noise_sigma < 0.0)
        throw InvalidInputError("noise_sigma must be >= 0");
    if (minutiae_count_range.first < 0 ||
        minutiae_count_range.second < minutiae_count_range.first)
        throw InvalidInputError("invalid minutiae count range");
    if (image_w <= 0.0 || image_h <= 0.0)
        throw InvalidInputError("image dimensions must be positive");
}

SynthData generate(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    SynthData data;
    data.raw_templates.reserve(cfg.identities);

    char id_buf[24];
    for (std::size_t ident = 0; ident < cfg.identities; ++ident) {
        auto anchor = random_unit_vector(rng);
        MinutiaeSet base;
        if (cfg.with_minutiae)
            base = random_base_set(cfg, rng);

        std::snprintf(id_buf, sizeof(id_buf), "id%08zu", ident);
        std::string subject(id_buf);

        for (int imp = 0; imp < cfg.impressions_per_identity; ++imp) {
            Template t = cfg.noise_sigma == 0.0
                             ? Template::normalized(anchor)
                             : perturbed_impression(anchor, cfg.noise_sigma, rng);
            MinutiaeSet set;
            if (cfg.with_minutiae)
                set = perturbed_set(base, cfg, rng);
            if (imp == 0) {
                GalleryRecord rec;
                rec.subject_id = subject;
                rec.finger_index = 0;
                rec.tpl = compress(t);
                if (cfg.with_minutiae)
                    rec.minutiae = std::move(set);
                data.gallery.enroll(std::move(rec));
                data.raw_templates.append(t);
            } else {
                data.probes.push_back({t, std::move(set), subject, 0});
            }
        }
    }
    return data;
}

double tar_at_far(const std::vector<double>& genuine, const std::vector<double>& imposter,
                  double far) {
    if (genuine.empty() || imposter.empty())
        throw InvalidInputError("need both genuine and imposter scores");
    std::vector<double> imp = imposter;
    std::sort(imp.begin(), imp.end(), std::greater<>());
    auto allowed = static_cast<std::size_t>(std::floor(far * static_cast<double>(imp.size())));
    std::size_t accepted = 0;
    if (allowed == 0) {
        double top = imp.front();
        for (double g : genuine)
            if (g > top)
                ++accepted;
    } else {
        double threshold = imp[allowed - 1];
        for (double g : genuine)
            if (g >= threshold)
                ++accepted;
    }
    return static_cast<double>(accepted) / static_cast<double>(genuine.size());
}

EvalReport evaluate(const SynthData& data, const EvalConfig& cfg) {
    const Gallery& gallery = data.gallery;
    if (gallery.empty())
        throw InvalidInputError("cannot evaluate an empty gallery");
    if (cfg.backend == EvalBackend::kPq && cfg.index == nullptr)
        throw InvalidInputError("PQ backend requested without an index");

    TemplateMatrix matrix = TemplateMatrix::from_gallery(gallery);
    std::size_t max_rank = std::max<std::size_t>(1, std::min(cfg.cmc_max_rank, gallery.size()));

    EvalReport report;
    report.cmc.assign(max_rank, 0.0);
    std::vector<double> latencies_ms;
    latencies_ms.reserve(data.probes.size());

    std::vector<double> genuine, imposter;
    std::mt19937_64 pair_rng(cfg.pair_seed);
    std::uniform_int_distribution<std::size_t> pick(0, gallery.size() - 1);

    SearchOptions opts{cfg.threads};
    for (const SynthProbe& probe : data.probes) {
        auto mate = gallery.find(probe.subject_id, probe.finger_index);
        if (!mate) {
            ++report.probes_excluded;
            continue;
        }

        auto t0 = std::chrono::steady_clock::now();
        std::vector<ScoredHit> hits;
        CandidateList reranked;
        if (cfg.backend == EvalBackend::kExact) {
            hits = scan_topk(matrix, probe.tpl, max_rank, opts);
        } else if (cfg.backend == EvalBackend::kPq) {
            hits = cfg.index->search_topk(probe.tpl, max_rank, opts);
        } else {
            FusionConfig fusion = cfg.fusion;
            fusion.threads = cfg.threads;
            reranked = two_stage_search(probe.tpl, probe.minutiae, gallery, matrix, cfg.index,
                                        fusion);
        }
        auto t1 = std::chrono::steady_clock::now();
        latencies_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());

        std::size_t rank = max_rank + 1;
        if (cfg.backend == EvalBackend::kRerank) {
            for (std::size_t r = 0; r < reranked.items.size() && r < max_rank; ++r) {
                if (reranked.items[r].ordinal == *mate) {
                    rank = r + 1;
                    break;
                }
            }
        } else {
            for (std::size_t r = 0; r < hits.size(); ++r) {
                if (hits[r].ordinal == *mate) {
                    rank = r + 1;
                    break;
                }
            }
        }
        for (std::size_t r = rank; r <= max_rank; ++r)
            report.cmc[r - 1] += 1.0;
        ++report.probes_evaluated;

        // Verification sweep: cosine (or fused) against the mate and against
        // sampled non-mates.
        const bool fuse = cfg.backend == EvalBackend::kRerank;
        auto verify_score = [&](std::size_t ordinal) {
            double s = dot192(probe.tpl.data(), matrix.row(ordinal));
            if (fuse)
                s += minutiae_score(probe.minutiae, *gallery.record(ordinal).minutiae,
                                    cfg.fusion.matcher);
            return s;
        };
        genuine.push_back(verify_score(*mate));
        for (std::size_t i = 0; i < cfg.imposters_per_probe; ++i) {
            std::size_t other = pick(pair_rng);
            if (other == *mate)
                continue;
            imposter.push_back(verify_score(other));
        }
    }

    if (report.probes_evaluated > 0) {
        for (double& v : report.cmc)
            v /= static_cast<double>(report.probes_evaluated);
        std::sort(latencies_ms.begin(), latencies_ms.end());
        double sum = 0.0;
        for (double v : latencies_ms)
            sum += v;
        report.latency.mean_ms = sum / static_cast<double>(latencies_ms.size());
        report.latency.p99_ms =
            latencies_ms[static_cast<std::size_t>(std::ceil(0.99 * latencies_ms.size())) - 1];
        if (!genuine.empty() && !imposter.empty())
            for (double far : cfg.far_targets)
                report.tar_at_far[far] = tar_at_far(genuine, imposter, far);
    }
    return report;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["cmc"] = cmc;
    nlohmann::json tar = nlohmann::json::object();
    for (const auto& [far, v] : tar_at_far)
        tar[std::to_string(far)] = v;
    j["tar_at_far"] = tar;
    j["latency_ms"] = {{"mean", latency.mean_ms}, {"p99", latency.p99_ms}};
    j["probes_evaluated"] = probes_evaluated;
    j["probes_excluded"] = probes_excluded;
    return j.dump(2);
}

} // namespace fpsearch
