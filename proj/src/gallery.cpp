#include "fpsearch/gallery.hpp"

#include <cstring>

#include "fpsearch/errors.hpp"
#include "fpsearch/io_util.hpp"

namespace fpsearch {

namespace {

constexpr char kMagic[4] = {'D', 'P', 'G', 'L'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kFlagHasMinutiae = 0x01;

} // namespace

std::string Gallery::key_of(std::string_view subject_id, int finger_index) {
    std::string key(subject_id);
    key.push_back('\x1f');
    key.push_back(static_cast<char>('0' + finger_index));
    return key;
}

void Gallery::enroll(GalleryRecord record) {
    if (record.subject_id.empty())
        throw InvalidInputError("subject_id must be non-empty");
    if (record.finger_index < 0 || record.finger_index > 9)
        throw InvalidInputError("finger_index must be in 0..9");
    std::string key = key_of(record.subject_id, record.finger_index);
    auto [it, inserted] = by_key_.try_emplace(std::move(key), records_.size());
    if (!inserted)
        throw ConflictError("duplicate enrollment for (" + record.subject_id + ", " +
                            std::to_string(record.finger_index) + ")");
    records_.push_back(std::move(record));
}

std::optional<std::size_t> Gallery::find(std::string_view subject_id, int finger_index) const {
    auto it = by_key_.find(key_of(subject_id, finger_index));
    if (it == by_key_.end())
        return std::nullopt;
    return it->second;
}

bool Gallery::all_have_minutiae() const {
    for (const GalleryRecord& r : records_)
        if (!r.minutiae)
            return false;
    return true;
}

// Layout, all little-endian:
//   "DPGL" | u16 version | u64 N | N records
// Record:
//   u32 payload_len | u32 id_len | u8 finger_index | u8 flags |
//   id bytes | 200-byte template |
//   [flags & 1: f64 width | f64 height | u32 n | n * (f64 x, f64 y, f64 theta)]
// payload_len counts everything after itself, so a scanner can skip records
// without parsing them.
std::vector<std::uint8_t> Gallery::serialize() const {
    ByteWriter w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put<std::uint16_t>(kVersion);
    w.put<std::uint64_t>(records_.size());
    for (const GalleryRecord& r : records_) {
        std::uint32_t payload = 4 + 1 + 1 + static_cast<std::uint32_t>(r.subject_id.size()) +
                                kCompressedTemplateBytes;
        if (r.minutiae)
            payload += 8 + 8 + 4 + 24 * static_cast<std::uint32_t>(r.minutiae->size());
        w.put<std::uint32_t>(payload);
        w.put<std::uint32_t>(static_cast<std::uint32_t>(r.subject_id.size()));
        w.put<std::uint8_t>(static_cast<std::uint8_t>(r.finger_index));
        w.put<std::uint8_t>(r.minutiae ? kFlagHasMinutiae : 0);
        w.put_bytes(r.subject_id.data(), r.subject_id.size());
        auto tpl = r.tpl.serialize();
        w.put_bytes(tpl.data(), tpl.size());
        if (r.minutiae) {
            w.put<double>(r.minutiae->width);
            w.put<double>(r.minutiae->height);
            w.put<std::uint32_t>(static_cast<std::uint32_t>(r.minutiae->size()));
            for (const Minutia& m : r.minutiae->minutiae) {
                w.put<double>(m.x);
                w.put<double>(m.y);
                w.put<double>(m.theta);
            }
        }
    }
    return w.take();
}

Gallery Gallery::deserialize(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes.data(), bytes.size());
    char magic[4];
    r.get_bytes(magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ParseError(0, "bad gallery magic");
    auto version = r.get<std::uint16_t>();
    if (version != kVersion)
        throw VersionError("unsupported gallery version " + std::to_string(version) +
                           " (supported: " + std::to_string(kVersion) + ")");
    auto count = r.get<std::uint64_t>();

    Gallery g;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::size_t record_start = r.offset();
        auto payload = r.get<std::uint32_t>();
        auto id_len = r.get<std::uint32_t>();
        GalleryRecord rec;
        rec.finger_index = r.get<std::uint8_t>();
        auto flags = r.get<std::uint8_t>();
        if (id_len == 0)
            throw ParseError(record_start, "record " + std::to_string(i) + " has empty subject id");
        rec.subject_id.resize(id_len);
        r.get_bytes(rec.subject_id.data(), id_len);
        std::array<std::uint8_t, kCompressedTemplateBytes> tpl_bytes;
        r.get_bytes(tpl_bytes.data(), tpl_bytes.size());
        rec.tpl = CompressedTemplate::deserialize(tpl_bytes);
        if (flags & kFlagHasMinutiae) {
            MinutiaeSet set;
            set.width = r.get<double>();
            set.height = r.get<double>();
            auto n = r.get<std::uint32_t>();
            set.minutiae.resize(n);
            for (std::uint32_t j = 0; j < n; ++j) {
                set.minutiae[j].x = r.get<double>();
                set.minutiae[j].y = r.get<double>();
                set.minutiae[j].theta = r.get<double>();
            }
            rec.minutiae = std::move(set);
        }
        std::size_t consumed = r.offset() - record_start;
        if (consumed != payload + 4u)
            throw ParseError(record_start, "record " + std::to_string(i) +
                                               " length mismatch: header says " +
                                               std::to_string(payload) + ", parsed " +
                                               std::to_string(consumed - 4));
        g.enroll(std::move(rec));
    }
    if (!r.exhausted())
        throw ParseError(r.offset(), "trailing bytes after last record");
    return g;
}

void Gallery::save(const std::string& path) const {
    write_file_bytes(path, serialize());
}

Gallery Gallery::load(const std::string& path) {
    return deserialize(read_file_bytes(path));
}

} // namespace fpsearch
