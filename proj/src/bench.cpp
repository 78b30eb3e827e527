#include "fpsearch/bench.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "fpsearch/errors.hpp"
#include "fpsearch/io_util.hpp"

namespace fpsearch {

namespace {

using nlohmann::json;

SynthConfig synth_from_json(const json& j) {
    SynthConfig cfg;
    cfg.identities = j.value("identities", cfg.identities);
    cfg.impressions_per_identity = j.value("impressions_per_identity", cfg.impressions_per_identity);
    cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
    if (j.contains("minutiae_count_range")) {
        auto r = j.at("minutiae_count_range");
        cfg.minutiae_count_range = {r.at(0).get<int>(), r.at(1).get<int>()};
    }
    cfg.minutiae_jitter_sigma = j.value("minutiae_jitter_sigma", cfg.minutiae_jitter_sigma);
    cfg.minutiae_drop_prob = j.value("minutiae_drop_prob", cfg.minutiae_drop_prob);
    cfg.with_minutiae = j.value("with_minutiae", cfg.with_minutiae);
    return cfg;
}

// Identification rank-1 over a prebuilt matrix (used for raw-vs-compressed
// comparisons where the gallery file is not the source of the floats).
double rank1_over_matrix(const TemplateMatrix& matrix, const SynthData& data, int threads) {
    const Gallery& g = data.gallery;
    std::size_t hitcount = 0, total = 0;
    SearchOptions opts{threads};
    for (const SynthProbe& probe : data.probes) {
        auto mate = g.find(probe.subject_id, probe.finger_index);
        if (!mate)
            continue;
        auto hits = scan_topk(matrix, probe.tpl, 1, opts);
        if (!hits.empty() && hits.front().ordinal == *mate)
            ++hitcount;
        ++total;
    }
    return total == 0 ? 0.0 : static_cast<double>(hitcount) / static_cast<double>(total);
}

} // namespace

ExperimentManifest ExperimentManifest::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(e.byte, std::string("manifest is not valid JSON: ") + e.what());
    }
    ExperimentManifest m;
    m.name = j.at("name").get<std::string>();
    m.kind = j.at("kind").get<std::string>();
    m.seed = j.value("seed", m.seed);
    if (j.contains("synth"))
        m.synth = synth_from_json(j.at("synth"));
    m.synth.seed = m.seed;
    m.k = j.value("k", m.k);
    if (j.contains("pq")) {
        auto p = j.at("pq");
        m.pq.m = p.value("m", m.pq.m);
        m.pq.z = p.value("z", m.pq.z);
        m.pq.max_train_samples = p.value("max_train_samples", m.pq.max_train_samples);
    }
    m.pq.seed = m.seed;
    if (j.contains("fusion")) {
        auto f = j.at("fusion");
        m.fusion.k = f.value("k", m.fusion.k);
        std::string norm = f.value("normalization", std::string("none"));
        m.fusion.normalization = norm == "minmax" ? FusionNormalization::kMinMaxOverCandidates
                                                  : FusionNormalization::kNone;
    }
    m.far_target = j.value("far_target", m.far_target);
    m.notes = j.value("notes", std::string());
    if (j.contains("expected")) {
        for (auto& [key, bounds] : j.at("expected").items()) {
            Bound b;
            if (bounds.contains("min")) {
                b.has_min = true;
                b.min = bounds.at("min").get<double>();
            }
            if (bounds.contains("max")) {
                b.has_max = true;
                b.max = bounds.at("max").get<double>();
            }
            m.expected[key] = b;
        }
    }
    return m;
}

ExperimentManifest ExperimentManifest::load(const std::string& path) {
    return from_json_text(read_file_text(path));
}

ExperimentResult run_experiment(const ExperimentManifest& manifest, int threads) {
    ExperimentResult result;
    auto& metrics = result.metrics;

    if (manifest.kind == "compression") {
        SynthData data = generate(manifest.synth);
        TemplateMatrix compressed = TemplateMatrix::from_gallery(data.gallery);
        double rank1_raw = rank1_over_matrix(data.raw_templates, data, threads);
        double rank1_comp = rank1_over_matrix(compressed, data, threads);
        metrics["rank1_raw"] = rank1_raw;
        metrics["rank1_compressed"] = rank1_comp;
        metrics["rank1_delta_pp"] = std::abs(rank1_raw - rank1_comp) * 100.0;
    } else if (manifest.kind == "pq_recall") {
        SynthData data = generate(manifest.synth);
        TemplateMatrix matrix = TemplateMatrix::from_gallery(data.gallery);
        PqParams params = manifest.pq;
        params.threads = threads;
        PqIndex index = PqIndex::train(matrix, params);
        index.add_matrix(matrix);

        EvalConfig exact_cfg;
        exact_cfg.backend = EvalBackend::kExact;
        exact_cfg.cmc_max_rank = manifest.k;
        exact_cfg.threads = threads;
        EvalReport exact = evaluate(data, exact_cfg);

        EvalConfig pq_cfg = exact_cfg;
        pq_cfg.backend = EvalBackend::kPq;
        pq_cfg.index = &index;
        EvalReport pq = evaluate(data, pq_cfg);

        // Top-1 recall: agreement of PQ's best hit with exact search's.
        std::size_t agree = 0, total = 0;
        SearchOptions opts{threads};
        for (const SynthProbe& probe : data.probes) {
            auto exact_hits = scan_topk(matrix, probe.tpl, 1, opts);
            auto pq_hits = index.search_topk(probe.tpl, 1, opts);
            if (!exact_hits.empty() && !pq_hits.empty() &&
                exact_hits.front().ordinal == pq_hits.front().ordinal)
                ++agree;
            ++total;
        }
        metrics["rank1_exact"] = exact.rank1();
        metrics["rank1_pq"] = pq.rank1();
        metrics["rank1_drop_pp"] = (exact.rank1() - pq.rank1()) * 100.0;
        metrics["recall1_vs_exact"] =
            total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
        result.report_json = pq.to_json();
    } else if (manifest.kind == "rerank_gain") {
        SynthData data = generate(manifest.synth);

        EvalConfig exact_cfg;
        exact_cfg.backend = EvalBackend::kExact;
        exact_cfg.cmc_max_rank = manifest.k;
        exact_cfg.threads = threads;
        EvalReport exact = evaluate(data, exact_cfg);

        EvalConfig rr_cfg = exact_cfg;
        rr_cfg.backend = EvalBackend::kRerank;
        rr_cfg.fusion = manifest.fusion;
        EvalReport reranked = evaluate(data, rr_cfg);

        metrics["rank1_exact"] = exact.rank1();
        metrics["rank1_rerank"] = reranked.rank1();
        metrics["rank1_gain_pp"] = (reranked.rank1() - exact.rank1()) * 100.0;
        result.report_json = reranked.to_json();
    } else if (manifest.kind == "fusion_verify") {
        SynthData data = generate(manifest.synth);
        TemplateMatrix matrix = TemplateMatrix::from_gallery(data.gallery);
        const Gallery& g = data.gallery;
        std::vector<double> gen_t, gen_m, gen_f, imp_t, imp_m, imp_f;
        std::mt19937_64 rng(manifest.seed ^ 0xabcdef);
        std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
        MinutiaMatchConfig matcher = manifest.fusion.matcher;
        for (const SynthProbe& probe : data.probes) {
            auto mate = g.find(probe.subject_id, probe.finger_index);
            if (!mate)
                continue;
            auto score_against = [&](std::size_t ordinal, std::vector<double>& t,
                                     std::vector<double>& m, std::vector<double>& f) {
                double st = dot192(probe.tpl.data(), matrix.row(ordinal));
                double sm = minutiae_score(probe.minutiae, *g.record(ordinal).minutiae, matcher);
                t.push_back(st);
                m.push_back(sm);
                f.push_back(st + sm);
            };
            score_against(*mate, gen_t, gen_m, gen_f);
            for (int i = 0; i < 10; ++i) {
                std::size_t other = pick(rng);
                if (other == *mate)
                    continue;
                score_against(other, imp_t, imp_m, imp_f);
            }
        }
        double far = manifest.far_target;
        metrics["tar_template"] = tar_at_far(gen_t, imp_t, far);
        metrics["tar_minutiae"] = tar_at_far(gen_m, imp_m, far);
        metrics["tar_fused"] = tar_at_far(gen_f, imp_f, far);
        metrics["fused_minus_best_pp"] =
            (metrics["tar_fused"] - std::max(metrics["tar_template"], metrics["tar_minutiae"])) *
            100.0;
    } else {
        throw InvalidInputError("unknown experiment kind: " + manifest.kind);
    }

    for (const auto& [name, bound] : manifest.expected) {
        auto it = metrics.find(name);
        if (it == metrics.end())
            throw InvalidInputError("manifest expects unknown metric: " + name);
        if (bound.has_min && it->second < bound.min)
            result.passed = false;
        if (bound.has_max && it->second > bound.max)
            result.passed = false;
    }

    json out;
    out["name"] = manifest.name;
    out["kind"] = manifest.kind;
    out["passed"] = result.passed;
    json obs = json::object();
    for (const auto& [name, value] : metrics) {
        json entry;
        entry["observed"] = value;
        auto it = manifest.expected.find(name);
        if (it != manifest.expected.end()) {
            if (it->second.has_min)
                entry["min"] = it->second.min;
            if (it->second.has_max)
                entry["max"] = it->second.max;
            bool ok = (!it->second.has_min || value >= it->second.min) &&
                      (!it->second.has_max || value <= it->second.max);
            entry["ok"] = ok;
        }
        obs[name] = entry;
    }
    out["metrics"] = obs;
    if (!result.report_json.empty())
        out["report"] = json::parse(result.report_json);
    result.report_json = out.dump(2);
    return result;
}

} // namespace fpsearch
