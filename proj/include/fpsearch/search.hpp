#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fpsearch/gallery.hpp"
#include "fpsearch/template.hpp"

namespace fpsearch {

/// One search hit before gallery keys are attached.
struct ScoredHit {
    std::size_t ordinal = 0;
    double score = 0.0;
};

/// Search result entry carrying the gallery key.
struct Candidate {
    std::size_t ordinal = 0;
    std::string subject_id;
    int finger_index = 0;
    MatchScore score;
};

/// Best-first ranked candidates. Similarity-scored lists are ordered by
/// descending score, distance-scored lists (PQ) by ascending distance; exact
/// ties break toward the lower ordinal in both cases.
struct CandidateList {
    std::vector<Candidate> items;
    std::size_t k = 0; // requested size; |items| = min(k, N)
};

/// Gallery templates decompressed once into a resident row-major N x 192
/// float matrix, so queries pay no per-record decompression.
class TemplateMatrix {
public:
    TemplateMatrix() = default;

    static TemplateMatrix from_gallery(const Gallery& gallery);

    void append(const Template& t);
    void reserve(std::size_t n) { data_.reserve(n * kTemplateDim); }

    std::size_t size() const noexcept { return n_; }
    const float* row(std::size_t i) const noexcept { return data_.data() + i * kTemplateDim; }
    Template row_template(std::size_t i) const;

private:
    std::vector<float> data_;
    std::size_t n_ = 0;
};

struct SearchOptions {
    int threads = 0; // 0: hardware concurrency
};

/// Keeps the k best (score, ordinal) pairs seen so far in a size-bounded
/// heap: higher score wins, equal scores prefer the lower ordinal. O(k)
/// memory, O(log k) per insertion on the heap path.
class BoundedTopK {
public:
    explicit BoundedTopK(std::size_t k) : k_(k) {}

    static bool better(const ScoredHit& a, const ScoredHit& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.ordinal < b.ordinal;
    }

    void offer(std::size_t ordinal, double score);

    /// Extracts the kept hits, best first.
    std::vector<ScoredHit> take_sorted();

    std::size_t capacity() const noexcept { return k_; }

private:
    std::size_t k_;
    std::vector<ScoredHit> heap_; // worst kept hit at the front
};

/// Exhaustive cosine scan over the matrix returning the k best hits,
/// identical to scoring every row, sorting descending (ties toward the lower
/// ordinal) and truncating to k. The scan shards the matrix into contiguous
/// ranges, one bounded heap per shard, and merges with the same comparator,
/// so the result does not depend on the thread count.
std::vector<ScoredHit> scan_topk(const TemplateMatrix& matrix, const Template& probe,
                                 std::size_t k, const SearchOptions& opts = {});

/// scan_topk plus gallery keys attached; scores are cosine-tagged.
CandidateList search_topk(const Gallery& gallery, const TemplateMatrix& matrix,
                          const Template& probe, std::size_t k,
                          const SearchOptions& opts = {});

} // namespace fpsearch
