#include "fpsearch/pq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <thread>

#include "fpsearch/errors.hpp"
#include "fpsearch/io_util.hpp"

namespace fpsearch {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'P', 'Q'};
constexpr std::uint16_t kVersion = 1;

int resolve_threads(int requested) {
    if (requested > 0)
        return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

double sub_distance2(const float* a, const float* b, int dsub) {
    double acc = 0.0;
    for (int t = 0; t < dsub; ++t) {
        double d = static_cast<double>(a[t]) - static_cast<double>(b[t]);
        acc += d * d;
    }
    return acc;
}

// float-precision variant for the training inner loop
float sub_distance2f(const float* a, const float* b, int dsub) {
    float acc = 0.0f;
    for (int t = 0; t < dsub; ++t) {
        float d = a[t] - b[t];
        acc += d * d;
    }
    return acc;
}

struct KMeansResult {
    std::vector<float> centroids; // z * dsub
};

// Lloyd's k-means over one sub-space with k-means++ seeding. points is
// n x dsub row-major. Deterministic for a given seed.
KMeansResult kmeans(const std::vector<float>& points, std::size_t n, int dsub, int z,
                    std::uint64_t seed, int max_iters, double tol) {
    std::mt19937_64 rng(seed);
    KMeansResult result;
    result.centroids.assign(static_cast<std::size_t>(z) * dsub, 0.0f);
    float* centroids = result.centroids.data();

    // k-means++: first centroid uniform, then D^2-weighted draws.
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    {
        std::uniform_int_distribution<std::size_t> pick(0, n - 1);
        std::size_t first = pick(rng);
        std::memcpy(centroids, &points[first * dsub], sizeof(float) * dsub);
        for (int c = 1; c < z; ++c) {
            const float* prev = centroids + static_cast<std::size_t>(c - 1) * dsub;
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double d = sub_distance2(&points[i * dsub], prev, dsub);
                if (d < dist2[i])
                    dist2[i] = d;
                total += dist2[i];
            }
            std::size_t chosen;
            if (total <= 0.0) {
                chosen = pick(rng); // all points coincide with a centroid
            } else {
                std::uniform_real_distribution<double> u(0.0, total);
                double target = u(rng);
                double acc = 0.0;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += dist2[i];
                    if (acc >= target) {
                        chosen = i;
                        break;
                    }
                }
            }
            std::memcpy(centroids + static_cast<std::size_t>(c) * dsub, &points[chosen * dsub],
                        sizeof(float) * dsub);
        }
    }

    std::vector<int> assign(n, 0);
    std::vector<std::size_t> counts(z, 0);
    std::vector<double> sums(static_cast<std::size_t>(z) * dsub, 0.0);
    double prev_distortion = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iters; ++iter) {
        // Assignment
        double distortion = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* p = &points[i * dsub];
            float best = std::numeric_limits<float>::infinity();
            int best_j = 0;
            for (int j = 0; j < z; ++j) {
                float d = sub_distance2f(p, centroids + static_cast<std::size_t>(j) * dsub, dsub);
                if (d < best) {
                    best = d;
                    best_j = j;
                }
            }
            assign[i] = best_j;
            distortion += best;
        }

        // Update
        std::fill(counts.begin(), counts.end(), 0);
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            int j = assign[i];
            counts[j]++;
            const float* p = &points[i * dsub];
            double* s = &sums[static_cast<std::size_t>(j) * dsub];
            for (int t = 0; t < dsub; ++t)
                s[t] += p[t];
        }
        for (int j = 0; j < z; ++j) {
            if (counts[j] == 0)
                continue;
            float* c = centroids + static_cast<std::size_t>(j) * dsub;
            for (int t = 0; t < dsub; ++t)
                c[t] = static_cast<float>(sums[static_cast<std::size_t>(j) * dsub + t] /
                                          static_cast<double>(counts[j]));
        }

        // Empty-cluster repair: reseed from the farthest point of the
        // largest cluster.
        for (int j = 0; j < z; ++j) {
            if (counts[j] != 0)
                continue;
            int largest = static_cast<int>(
                std::max_element(counts.begin(), counts.end()) - counts.begin());
            double far_d = -1.0;
            std::size_t far_i = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assign[i] != largest)
                    continue;
                double d = sub_distance2(
                    &points[i * dsub],
                    centroids + static_cast<std::size_t>(largest) * dsub, dsub);
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            std::memcpy(centroids + static_cast<std::size_t>(j) * dsub, &points[far_i * dsub],
                        sizeof(float) * dsub);
            assign[far_i] = j;
            counts[j] = 1;
            counts[largest]--;
        }

        if (prev_distortion - distortion <= tol * std::abs(prev_distortion) &&
            std::isfinite(prev_distortion))
            break;
        prev_distortion = distortion;
    }
    return result;
}

} // namespace

void PqParams::validate() const {
    if (m <= 0 || static_cast<int>(kTemplateDim) % m != 0)
        throw InvalidInputError("m must divide " + std::to_string(kTemplateDim));
    if (z < 1 || z > 256)
        throw InvalidInputError("z must be in 1..256 so codes fit one byte");
    if (max_iters < 1 || tol < 0.0)
        throw InvalidInputError("invalid k-means parameters");
}

PqIndex PqIndex::train(const TemplateMatrix& samples, const PqParams& params) {
    params.validate();
    std::size_t n = samples.size();
    std::size_t train_n = n;
    if (params.max_train_samples > 0)
        train_n = std::min(train_n, params.max_train_samples);
    if (train_n < static_cast<std::size_t>(params.z))
        throw InvalidInputError("need at least z=" + std::to_string(params.z) +
                                " training samples, got " + std::to_string(train_n));

    // Deterministic stride subsample when capped.
    std::vector<std::size_t> chosen(train_n);
    double stride = static_cast<double>(n) / static_cast<double>(train_n);
    for (std::size_t i = 0; i < train_n; ++i)
        chosen[i] = std::min(n - 1, static_cast<std::size_t>(static_cast<double>(i) * stride));

    PqIndex idx;
    idx.m_ = params.m;
    idx.z_ = params.z;
    idx.dsub_ = static_cast<int>(kTemplateDim) / params.m;
    idx.codebooks_.assign(
        static_cast<std::size_t>(params.m) * params.z * idx.dsub_, 0.0f);

    int threads = resolve_threads(params.threads);
    std::vector<std::thread> workers;
    std::size_t per = (static_cast<std::size_t>(params.m) + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        std::size_t begin = w * per;
        std::size_t end = std::min<std::size_t>(params.m, begin + per);
        if (begin >= end)
            break;
        workers.emplace_back([&, begin, end] {
            std::vector<float> sub(train_n * static_cast<std::size_t>(idx.dsub_));
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t r = 0; r < train_n; ++r)
                    std::memcpy(&sub[r * idx.dsub_],
                                samples.row(chosen[r]) + i * idx.dsub_,
                                sizeof(float) * idx.dsub_);
                // Distinct seed per sub-space keeps training independent of
                // the thread layout.
                auto res = kmeans(sub, train_n, idx.dsub_, params.z,
                                  params.seed * 0x9e3779b97f4a7c15ULL + i, params.max_iters,
                                  params.tol);
                std::copy(res.centroids.begin(), res.centroids.end(),
                          idx.codebooks_.begin() +
                              static_cast<std::size_t>(i) * params.z * idx.dsub_);
            }
        });
    }
    for (auto& t : workers)
        t.join();
    return idx;
}

std::span<const float> PqIndex::centroid(int i, int j) const {
    const float* p = codebooks_.data() +
                     (static_cast<std::size_t>(i) * z_ + j) * static_cast<std::size_t>(dsub_);
    return {p, static_cast<std::size_t>(dsub_)};
}

std::vector<std::uint8_t> PqIndex::quantize(const Template& t) const {
    std::vector<std::uint8_t> code(m_);
    for (int i = 0; i < m_; ++i) {
        const float* sub = t.data() + static_cast<std::size_t>(i) * dsub_;
        double best = std::numeric_limits<double>::infinity();
        int best_j = 0;
        for (int j = 0; j < z_; ++j) {
            double d = sub_distance2(sub, centroid(i, j).data(), dsub_);
            if (d < best) { // strict: ties stay at the lowest j
                best = d;
                best_j = j;
            }
        }
        code[i] = static_cast<std::uint8_t>(best_j);
    }
    return code;
}

void PqIndex::add(const Template& t) {
    auto code = quantize(t);
    codes_.insert(codes_.end(), code.begin(), code.end());
    ++n_;
}

void PqIndex::add_matrix(const TemplateMatrix& matrix) {
    std::size_t start = n_;
    std::size_t count = matrix.size();
    codes_.resize((start + count) * static_cast<std::size_t>(m_));
    int threads = resolve_threads(0);
    std::vector<std::thread> workers;
    std::size_t chunk = (count + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
        std::size_t begin = w * chunk;
        std::size_t end = std::min(count, begin + chunk);
        if (begin >= end)
            break;
        workers.emplace_back([&, begin, end] {
            for (std::size_t r = begin; r < end; ++r) {
                auto code = quantize(matrix.row_template(r));
                std::memcpy(codes_.data() + (start + r) * static_cast<std::size_t>(m_),
                            code.data(), code.size());
            }
        });
    }
    for (auto& t : workers)
        t.join();
    n_ += count;
}

std::vector<float> PqIndex::reconstruct(std::span<const std::uint8_t> code) const {
    std::vector<float> out(kTemplateDim);
    for (int i = 0; i < m_; ++i) {
        auto c = centroid(i, code[i]);
        std::copy(c.begin(), c.end(), out.begin() + static_cast<std::size_t>(i) * dsub_);
    }
    return out;
}

std::vector<double> PqIndex::build_table(const Template& probe) const {
    std::vector<double> table(static_cast<std::size_t>(m_) * z_);
    for (int i = 0; i < m_; ++i) {
        const float* sub = probe.data() + static_cast<std::size_t>(i) * dsub_;
        double* row = table.data() + static_cast<std::size_t>(i) * z_;
        for (int j = 0; j < z_; ++j)
            row[j] = sub_distance2(sub, centroid(i, j).data(), dsub_);
    }
    return table;
}

double PqIndex::adc_distance(std::span<const double> table, const std::uint8_t* code) const {
    const double* t = table.data();
    double acc = 0.0;
    for (int i = 0; i < m_; ++i)
        acc += t[static_cast<std::size_t>(i) * z_ + code[i]];
    return acc;
}

std::vector<ScoredHit> PqIndex::search_topk(const Template& probe, std::size_t k,
                                            const SearchOptions& opts) const {
    if (k == 0)
        throw InvalidInputError("k must be >= 1");
    if (n_ == 0)
        return {};
    k = std::min(k, n_);
    auto table = build_table(probe);
    const double* tbl = table.data();
    const int m = m_, z = z_;

    // Ascending distance with ties to the lower ordinal is descending
    // -distance under the shared heap comparator.
    auto scan = [&](std::size_t begin, std::size_t end, BoundedTopK& heap) {
        const std::uint8_t* row = codes_.data() + begin * static_cast<std::size_t>(m);
        for (std::size_t r = begin; r < end; ++r, row += m) {
            double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
            int i = 0;
            for (; i + 4 <= m; i += 4) {
                acc0 += tbl[static_cast<std::size_t>(i) * z + row[i]];
                acc1 += tbl[static_cast<std::size_t>(i + 1) * z + row[i + 1]];
                acc2 += tbl[static_cast<std::size_t>(i + 2) * z + row[i + 2]];
                acc3 += tbl[static_cast<std::size_t>(i + 3) * z + row[i + 3]];
            }
            double acc = (acc0 + acc1) + (acc2 + acc3);
            for (; i < m; ++i)
                acc += tbl[static_cast<std::size_t>(i) * z + row[i]];
            heap.offer(r, -acc);
        }
    };

    int threads = resolve_threads(opts.threads);
    std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(threads), n_);
    std::vector<ScoredHit> hits;
    if (shards <= 1) {
        BoundedTopK heap(k);
        scan(0, n_, heap);
        hits = heap.take_sorted();
    } else {
        std::vector<BoundedTopK> heaps(shards, BoundedTopK(k));
        std::vector<std::thread> workers;
        std::size_t chunk = (n_ + shards - 1) / shards;
        for (std::size_t s = 0; s < shards; ++s) {
            std::size_t begin = s * chunk;
            std::size_t end = std::min(n_, begin + chunk);
            workers.emplace_back([&, begin, end, s] { scan(begin, end, heaps[s]); });
        }
        for (auto& t : workers)
            t.join();
        std::vector<ScoredHit> all;
        all.reserve(shards * k);
        for (auto& h : heaps) {
            auto part = h.take_sorted();
            all.insert(all.end(), part.begin(), part.end());
        }
        std::sort(all.begin(), all.end(), BoundedTopK::better);
        all.resize(std::min(all.size(), k));
        hits = std::move(all);
    }
    for (ScoredHit& h : hits)
        h.score = -h.score; // back to plain distances
    return hits;
}

std::vector<std::uint8_t> PqIndex::serialize() const {
    ByteWriter w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(d_));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m_));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(z_));
    for (float c : codebooks_)
        w.put<float>(c);
    w.put<std::uint64_t>(n_);
    w.put_bytes(codes_.data(), codes_.size());
    return w.take();
}

PqIndex PqIndex::deserialize(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.get_bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError(0, "bad PQ index magic");
    auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw VersionError("unsupported PQ index version " + std::to_string(version) +
                           " (supported: " + std::to_string(kVersion) + ")");
    PqIndex idx;
    auto d = r.get<std::uint32_t>();
    if (d != kTemplateDim)
        throw ParseError(6, "unexpected dimensionality " + std::to_string(d));
    idx.m_ = static_cast<int>(r.get<std::uint32_t>());
    idx.z_ = static_cast<int>(r.get<std::uint32_t>());
    if (idx.m_ <= 0 || static_cast<int>(kTemplateDim) % idx.m_ != 0 || idx.z_ < 1 ||
        idx.z_ > 256)
        throw ParseError(10, "invalid m/z in PQ index header");
    idx.dsub_ = static_cast<int>(kTemplateDim) / idx.m_;
    std::size_t cb = static_cast<std::size_t>(idx.m_) * idx.z_ * idx.dsub_;
    idx.codebooks_.resize(cb);
    for (std::size_t i = 0; i < cb; ++i)
        idx.codebooks_[i] = r.get<float>();
    idx.n_ = r.get<std::uint64_t>();
    idx.codes_.resize(idx.n_ * static_cast<std::size_t>(idx.m_));
    r.get_bytes(idx.codes_.data(), idx.codes_.size());
    if (!r.exhausted())
        throw ParseError(r.offset(), "trailing bytes after PQ code rows");
    return idx;
}

void PqIndex::save(const std::string& path) const {
    write_file_bytes(path, serialize());
}

PqIndex PqIndex::load(const std::string& path) {
    return deserialize(read_file_bytes(path));
}

CandidateList pq_search_topk(const Gallery& gallery, const PqIndex& index, const Template& probe,
                             std::size_t k, const SearchOptions& opts) {
    if (index.size() != gallery.size())
        throw InvalidInputError("index/gallery size mismatch");
    if (k == 0)
        throw InvalidInputError("k must be >= 1");
    CandidateList list;
    list.k = k;
    auto hits = index.search_topk(probe, k, opts);
    list.items.reserve(hits.size());
    for (const ScoredHit& h : hits) {
        const GalleryRecord& r = gallery.record(h.ordinal);
        list.items.push_back(
            {h.ordinal, r.subject_id, r.finger_index, MatchScore{h.score, ScoreTag::kPqDistance}});
    }
    return list;
}

} // namespace fpsearch
