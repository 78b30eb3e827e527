#include "fpsearch/io_util.hpp"

#include <fstream>

namespace fpsearch {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open file for reading: " + path);
    in.seekg(0, std::ios::end);
    auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0, std::ios::beg);
    std::vector<std::uint8_t> bytes(size);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size)))
        throw IoError("failed to read " + std::to_string(size) + " bytes from: " + path);
    return bytes;
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot open file for writing: " + path);
    if (!bytes.empty())
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw IoError("failed to write to: " + path);
}

std::string read_file_text(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open file for reading: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return text;
}

void write_file_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot open file for writing: " + path);
    out << text;
    if (!out)
        throw IoError("failed to write to: " + path);
}

} // namespace fpsearch
