#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "forge/common.hpp"

namespace forge {

// Raw little-endian array files. All on-disk float data is float32; the
// in-memory representation is double.

void write_f32(const std::filesystem::path& path, const double* data, std::size_t count);
std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected_count);

void write_i32(const std::filesystem::path& path, const int* data, std::size_t count);
std::vector<std::int32_t> read_i32(const std::filesystem::path& path, std::size_t expected_count);

}  // namespace forge
