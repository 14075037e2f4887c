#include "forge/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace forge {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path.string());
    return in;
}

std::size_t file_size_or_throw(const std::filesystem::path& path) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw DataError("cannot stat: " + path.string());
    return static_cast<std::size_t>(size);
}

}  // namespace

void write_f32(const std::filesystem::path& path, const double* data, std::size_t count) {
    std::vector<float> buf(count);
    for (std::size_t i = 0; i < count; ++i) buf[i] = static_cast<float>(data[i]);
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
    if (!out) throw DataError("short write: " + path.string());
}

std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count) {
    const std::size_t bytes = file_size_or_throw(path);
    if (bytes != expected_count * sizeof(float))
        throw DataError(path.string() + ": expected " + std::to_string(expected_count) +
                        " float32 values, file holds " + std::to_string(bytes / sizeof(float)));
    std::vector<float> buf(expected_count);
    auto in = open_in(path);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("short read: " + path.string());
    return buf;
}

void write_i32(const std::filesystem::path& path, const int* data, std::size_t count) {
    static_assert(sizeof(int) == 4);
    auto out = open_out(path);
    out.write(reinterpret_cast<const char*>(data),
              static_cast<std::streamsize>(count * sizeof(int)));
    if (!out) throw DataError("short write: " + path.string());
}

std::vector<std::int32_t> read_i32(const std::filesystem::path& path, std::size_t expected_count) {
    const std::size_t bytes = file_size_or_throw(path);
    if (bytes != expected_count * sizeof(std::int32_t))
        throw DataError(path.string() + ": expected " + std::to_string(expected_count) +
                        " int32 values, file holds " + std::to_string(bytes / sizeof(std::int32_t)));
    std::vector<std::int32_t> buf(expected_count);
    auto in = open_in(path);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw DataError("short read: " + path.string());
    return buf;
}

}  // namespace forge
