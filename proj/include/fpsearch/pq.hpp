#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fpsearch/search.hpp"
#include "fpsearch/template.hpp"

namespace fpsearch {

struct PqParams {
    int m = 64;  // sub-vector count; must divide 192
    int z = 256; // centroids per codebook; at most 256 so a code fits one byte
    std::uint64_t seed = 0;
    int max_iters = 100;
    double tol = 1e-4; // stop when relative distortion improvement falls below
    /// Cap on training vectors per codebook; 0 trains on everything. Large
    /// galleries train on a deterministic subsample of their own templates.
    std::size_t max_train_samples = 0;
    int threads = 0;

    void validate() const;
};

/// Product-quantization index: m codebooks of z centroids over 192/m-d
/// sub-vectors, plus one m-byte code row per indexed record. Asymmetric
/// queries build an m x z table of partial squared distances and rank records
/// by the sum of m table lookups.
class PqIndex {
public:
    /// Trains per-sub-space codebooks with k-means (k-means++ seeding,
    /// Lloyd iterations). Deterministic given the seed. Throws
    /// InvalidInputError when fewer than z samples are provided.
    static PqIndex train(const TemplateMatrix& samples, const PqParams& params);

    int dim() const noexcept { return d_; }
    int sub_count() const noexcept { return m_; }
    int codebook_size() const noexcept { return z_; }
    int sub_dim() const noexcept { return dsub_; }
    std::size_t size() const noexcept { return n_; }
    std::size_t code_bytes() const noexcept { return static_cast<std::size_t>(m_); }

    /// Centroid j of sub-space i, as a dsub-length span.
    std::span<const float> centroid(int i, int j) const;

    /// Nearest-centroid code row for a template (m bytes; ties to lowest j).
    std::vector<std::uint8_t> quantize(const Template& t) const;

    /// Appends records (their code rows) to the index.
    void add(const Template& t);
    void add_matrix(const TemplateMatrix& matrix);

    const std::uint8_t* code_row(std::size_t ordinal) const {
        return codes_.data() + ordinal * static_cast<std::size_t>(m_);
    }

    /// Concatenation of the code row's centroids; generally not unit length.
    std::vector<float> reconstruct(std::span<const std::uint8_t> code) const;

    /// Per-query table: table[i*z + j] = squared distance between the probe's
    /// i-th sub-vector and centroid j of sub-space i.
    std::vector<double> build_table(const Template& probe) const;

    /// Sum of the m table entries selected by a code row.
    double adc_distance(std::span<const double> table, const std::uint8_t* code) const;

    /// Top-k records by ascending asymmetric distance, ties to the lower
    /// ordinal. Each record costs m table lookups and additions.
    std::vector<ScoredHit> search_topk(const Template& probe, std::size_t k,
                                       const SearchOptions& opts = {}) const;

    std::vector<std::uint8_t> serialize() const;
    static PqIndex deserialize(const std::vector<std::uint8_t>& bytes);
    void save(const std::string& path) const;
    static PqIndex load(const std::string& path);

private:
    PqIndex() = default;

    int d_ = static_cast<int>(kTemplateDim);
    int m_ = 0;
    int z_ = 0;
    int dsub_ = 0;
    std::size_t n_ = 0;
    std::vector<float> codebooks_; // m * z * dsub, row-major
    std::vector<std::uint8_t> codes_; // n * m, row-major
};

/// Search over a PQ index with gallery keys attached; scores carry the
/// asymmetric distance (tag kPqDistance), best (smallest) first.
CandidateList pq_search_topk(const Gallery& gallery, const PqIndex& index, const Template& probe,
                             std::size_t k, const SearchOptions& opts = {});

} // namespace fpsearch
