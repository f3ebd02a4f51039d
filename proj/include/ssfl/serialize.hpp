#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssfl/dense_array.hpp"

namespace ssfl {

// Flat binary container for named arrays: 8-byte magic, u32 version,
// u64 entry count, then per entry u32 name length, name bytes, u32 rank,
// u64 dims, raw little-endian 64-bit floats. Used for parameter snapshots,
// prototype banks, and payload-size measurement.
struct NamedArray {
  std::string name;
  DenseArray array;
};

std::vector<std::uint8_t> encode_snapshot(const std::vector<NamedArray>& entries);
std::vector<NamedArray> decode_snapshot(const std::vector<std::uint8_t>& bytes);

void write_snapshot_file(const std::string& path, const std::vector<NamedArray>& entries);
std::vector<NamedArray> read_snapshot_file(const std::string& path);

}  // namespace ssfl
