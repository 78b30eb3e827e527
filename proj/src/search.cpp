#include "fpsearch/search.hpp"

#include <algorithm>
#include <thread>

#include "fpsearch/errors.hpp"

namespace fpsearch {

TemplateMatrix TemplateMatrix::from_gallery(const Gallery& gallery) {
    TemplateMatrix m;
    m.reserve(gallery.size());
    for (const GalleryRecord& r : gallery.records())
        m.append(decompress(r.tpl));
    return m;
}

void TemplateMatrix::append(const Template& t) {
    data_.insert(data_.end(), t.features.begin(), t.features.end());
    ++n_;
}

Template TemplateMatrix::row_template(std::size_t i) const {
    Template t;
    std::copy(row(i), row(i) + kTemplateDim, t.features.begin());
    return t;
}

void BoundedTopK::offer(std::size_t ordinal, double score) {
    if (k_ == 0)
        return;
    ScoredHit hit{ordinal, score};
    // Heap "max" under this comparator is the worst kept hit.
    auto worst_first = [](const ScoredHit& a, const ScoredHit& b) { return better(a, b); };
    if (heap_.size() < k_) {
        heap_.push_back(hit);
        std::push_heap(heap_.begin(), heap_.end(), worst_first);
        return;
    }
    if (!better(hit, heap_.front()))
        return;
    std::pop_heap(heap_.begin(), heap_.end(), worst_first);
    heap_.back() = hit;
    std::push_heap(heap_.begin(), heap_.end(), worst_first);
}

std::vector<ScoredHit> BoundedTopK::take_sorted() {
    std::vector<ScoredHit> out = std::move(heap_);
    heap_.clear();
    std::sort(out.begin(), out.end(), better);
    return out;
}

namespace {

int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void scan_range(const TemplateMatrix& matrix, const Template& probe, std::size_t begin,
                std::size_t end, BoundedTopK& heap) {
    const float* q = probe.data();
    for (std::size_t i = begin; i < end; ++i)
        heap.offer(i, dot192(q, matrix.row(i)));
}

} // namespace

std::vector<ScoredHit> scan_topk(const TemplateMatrix& matrix, const Template& probe,
                                 std::size_t k, const SearchOptions& opts) {
    if (k == 0)
        throw InvalidInputError("k must be >= 1");
    const std::size_t n = matrix.size();
    if (n == 0)
        return {};
    k = std::min(k, n);

    int threads = resolve_threads(opts.threads);
    std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(threads), n);

    if (shards <= 1) {
        BoundedTopK heap(k);
        scan_range(matrix, probe, 0, n, heap);
        return heap.take_sorted();
    }

    std::vector<BoundedTopK> heaps(shards, BoundedTopK(k));
    std::vector<std::thread> workers;
    workers.reserve(shards);
    std::size_t chunk = (n + shards - 1) / shards;
    for (std::size_t s = 0; s < shards; ++s) {
        std::size_t begin = s * chunk;
        std::size_t end = std::min(n, begin + chunk);
        workers.emplace_back(
            [&, begin, end, s] { scan_range(matrix, probe, begin, end, heaps[s]); });
    }
    for (auto& t : workers)
        t.join();

    // Merge per-shard winners under the same comparator; per-record scores
    // do not depend on the shard layout, so neither does the merged list.
    std::vector<ScoredHit> all;
    all.reserve(shards * k);
    for (auto& h : heaps) {
        auto part = h.take_sorted();
        all.insert(all.end(), part.begin(), part.end());
    }
    std::sort(all.begin(), all.end(), BoundedTopK::better);
    all.resize(std::min(all.size(), k));
    return all;
}

CandidateList search_topk(const Gallery& gallery, const TemplateMatrix& matrix,
                          const Template& probe, std::size_t k, const SearchOptions& opts) {
    if (matrix.size() != gallery.size())
        throw InvalidInputError("matrix/gallery size mismatch");
    if (k == 0)
        throw InvalidInputError("k must be >= 1");
    CandidateList list;
    list.k = k;
    if (gallery.empty())
        return list;
    auto hits = scan_topk(matrix, probe, k, opts);
    list.items.reserve(hits.size());
    for (const ScoredHit& h : hits) {
        const GalleryRecord& r = gallery.record(h.ordinal);
        list.items.push_back(
            {h.ordinal, r.subject_id, r.finger_index, MatchScore{h.score, ScoreTag::kCosine}});
    }
    return list;
}

} // namespace fpsearch
