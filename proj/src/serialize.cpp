#include "ssfl/serialize.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ssfl {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'F', 'L', 'S', 'N', 'A', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

struct Reader {
  const std::vector<std::uint8_t>& b;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > b.size()) throw std::runtime_error("snapshot: truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
};

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const std::vector<NamedArray>& entries) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 8);
  put_u32(out, kVersion);
  put_u64(out, entries.size());
  for (const auto& e : entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put_u32(out, static_cast<std::uint32_t>(e.array.rank()));
    for (std::size_t d : e.array.shape) put_u64(out, d);
    for (double v : e.array.data) put_f64(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_snapshot(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(8);
  if (std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw std::runtime_error("snapshot: bad magic");
  r.pos = 8;
  std::uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("snapshot: unsupported version " + std::to_string(version));
  std::uint64_t count = r.u64();
  std::vector<NamedArray> entries;
  entries.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32();
    r.need(name_len);
    std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
    r.pos += name_len;
    std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape;
    shape.reserve(rank);
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<std::size_t>(r.u64()));
    std::size_t n = DenseArray::count(shape);
    std::vector<double> data(n);
    for (std::size_t j = 0; j < n; ++j) data[j] = r.f64();
    entries.push_back({std::move(name), DenseArray(std::move(shape), std::move(data))});
  }
  return entries;
}

void write_snapshot_file(const std::string& path, const std::vector<NamedArray>& entries) {
  auto bytes = encode_snapshot(entries);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<NamedArray> read_snapshot_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace ssfl
