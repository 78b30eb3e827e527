#pragma once

#include "fpsearch/gallery.hpp"
#include "fpsearch/minutiae_match.hpp"
#include "fpsearch/pq.hpp"
#include "fpsearch/search.hpp"
#include "fpsearch/template.hpp"

namespace fpsearch {

enum class Stage1Backend : std::uint8_t { kExact, kPq };

enum class FusionNormalization : std::uint8_t {
    kNone,               // fuse raw minutiae scores
    kMinMaxOverCandidates, // min-max scale minutiae scores over the candidate list
};

struct FusionConfig {
    std::size_t k = 500; // stage-1 candidate depth
    FusionNormalization normalization = FusionNormalization::kNone;
    Stage1Backend backend = Stage1Backend::kExact;
    MinutiaMatchConfig matcher;
    int threads = 0;

    void validate() const;
};

/// Two-stage identification: stage 1 retrieves the top-k candidates by
/// template similarity (exact cosine scan or PQ), stage 2 re-sorts exactly
/// those k by the sum of the candidate's minutiae-matcher score and its
/// cosine similarity. Ties in the fused score keep stage-1 order, so a
/// candidate that led both scores can never be demoted. Candidates outside
/// the stage-1 list never re-enter.
///
/// The returned scores carry the fused values (tag kFused). Throws
/// ConfigError when any gallery record lacks minutiae, and InvalidInputError
/// when backend kPq is requested without an index.
CandidateList two_stage_search(const Template& probe_t, const MinutiaeSet& probe_m,
                               const Gallery& gallery, const TemplateMatrix& matrix,
                               const PqIndex* index, const FusionConfig& cfg);

/// 1:1 sum-score fusion: cosine similarity plus minutiae-matcher score.
MatchScore fused_verify(const Template& probe_t, const Template& gallery_t,
                        const MinutiaeSet& probe_m, const MinutiaeSet& gallery_m,
                        const MinutiaMatchConfig& matcher = {});

} // namespace fpsearch
