#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpsearch/minutiae.hpp"
#include "fpsearch/template.hpp"

namespace fpsearch {

/// One enrolled finger: an identity label, a finger index, the compressed
/// template, and optionally the minutiae set used for re-ranking.
struct GalleryRecord {
    std::string subject_id;
    int finger_index = 0; // 0..9
    CompressedTemplate tpl;
    std::optional<MinutiaeSet> minutiae;
};

/// Ordered enrollment store. Iteration order equals enrollment order, and a
/// record's position (its ordinal) is the stable identifier search results
/// refer to. (subject_id, finger_index) pairs are unique.
class Gallery {
public:
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Appends a record. Throws ConflictError on a duplicate key and
    /// InvalidInputError on an empty subject id or finger index outside 0..9.
    void enroll(GalleryRecord record);

    const GalleryRecord& record(std::size_t ordinal) const { return records_.at(ordinal); }
    const std::vector<GalleryRecord>& records() const noexcept { return records_; }

    std::optional<std::size_t> find(std::string_view subject_id, int finger_index) const;

    /// True when every record carries a minutiae set (re-ranking needs this).
    bool all_have_minutiae() const;

    std::vector<std::uint8_t> serialize() const;
    static Gallery deserialize(const std::vector<std::uint8_t>& bytes);

    void save(const std::string& path) const;
    static Gallery load(const std::string& path);

private:
    static std::string key_of(std::string_view subject_id, int finger_index);

    std::vector<GalleryRecord> records_;
    std::unordered_map<std::string, std::size_t> by_key_;
};

} // namespace fpsearch
