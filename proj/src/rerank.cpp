#include "fpsearch/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "fpsearch/errors.hpp"

namespace fpsearch {

void FusionConfig::validate() const {
    if (k < 1)
        throw InvalidInputError("candidate depth k must be >= 1");
    matcher.validate();
}

CandidateList two_stage_search(const Template& probe_t, const MinutiaeSet& probe_m,
                               const Gallery& gallery, const TemplateMatrix& matrix,
                               const PqIndex* index, const FusionConfig& cfg) {
    cfg.validate();
    if (!gallery.all_have_minutiae())
        throw ConfigError("two-stage search needs minutiae for every gallery record");

    SearchOptions opts{cfg.threads};
    std::vector<ScoredHit> stage1;
    if (cfg.backend == Stage1Backend::kPq) {
        if (index == nullptr)
            throw InvalidInputError("PQ backend requested without an index");
        if (index->size() != gallery.size())
            throw InvalidInputError("index/gallery size mismatch");
        stage1 = index->search_topk(probe_t, cfg.k, opts);
    } else {
        stage1 = scan_topk(matrix, probe_t, cfg.k, opts);
    }

    CandidateList list;
    list.k = cfg.k;
    if (stage1.empty())
        return list;

    // Stage 2: minutiae score per candidate (parallel, deterministic: the
    // output slot is fixed per candidate), then fused = minutiae + cosine.
    std::vector<double> minu(stage1.size(), 0.0);
    {
        int threads = cfg.threads > 0
                          ? cfg.threads
                          : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
        std::size_t chunk =
            (stage1.size() + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
        std::vector<std::thread> workers;
        for (int w = 0; w < threads; ++w) {
            std::size_t begin = static_cast<std::size_t>(w) * chunk;
            std::size_t end = std::min(stage1.size(), begin + chunk);
            if (begin >= end)
                break;
            workers.emplace_back([&, begin, end] {
                for (std::size_t c = begin; c < end; ++c) {
                    const GalleryRecord& rec = gallery.record(stage1[c].ordinal);
                    minu[c] = minutiae_score(probe_m, *rec.minutiae, cfg.matcher);
                }
            });
        }
        for (auto& t : workers)
            t.join();
    }

    if (cfg.normalization == FusionNormalization::kMinMaxOverCandidates) {
        auto [lo_it, hi_it] = std::minmax_element(minu.begin(), minu.end());
        double lo = *lo_it, hi = *hi_it;
        if (hi > lo) {
            for (double& v : minu)
                v = (v - lo) / (hi - lo);
        } else {
            std::fill(minu.begin(), minu.end(), 0.0); // constant scores fuse as a constant
        }
    }

    struct Fused {
        std::size_t stage1_rank;
        std::size_t ordinal;
        double fused;
    };
    std::vector<Fused> fused(stage1.size());
    for (std::size_t c = 0; c < stage1.size(); ++c) {
        double sim = cfg.backend == Stage1Backend::kExact
                         ? stage1[c].score
                         : dot192(probe_t.data(), matrix.row(stage1[c].ordinal));
        fused[c] = {c, stage1[c].ordinal, minu[c] + sim};
    }
    // Stable on the fused score: exact ties keep stage-1 order.
    std::stable_sort(fused.begin(), fused.end(),
                     [](const Fused& a, const Fused& b) { return a.fused > b.fused; });

    list.items.reserve(fused.size());
    for (const Fused& f : fused) {
        const GalleryRecord& rec = gallery.record(f.ordinal);
        list.items.push_back(
            {f.ordinal, rec.subject_id, rec.finger_index, MatchScore{f.fused, ScoreTag::kFused}});
    }
    return list;
}

MatchScore fused_verify(const Template& probe_t, const Template& gallery_t,
                        const MinutiaeSet& probe_m, const MinutiaeSet& gallery_m,
                        const MinutiaMatchConfig& matcher) {
    double s = cosine_score(probe_t, gallery_t).value;
    double m = minutiae_score(probe_m, gallery_m, matcher);
    return {s + m, ScoreTag::kFused};
}

} // namespace fpsearch
