#include "ssfl/prototypes.hpp"

#include <cstring>
#include <stdexcept>
#include <string>

namespace ssfl {

std::size_t PrototypeBank::dim() const {
  if (classes.empty()) return 0;
  return classes.begin()->second.vec.size();
}

void PrototypeBank::add(int cls, const std::vector<double>& embedding) {
  auto& e = classes[cls];
  if (e.count == 0) {
    e.vec = embedding;
    e.count = 1;
    return;
  }
  if (e.vec.size() != embedding.size())
    throw std::invalid_argument("PrototypeBank::add: dimension mismatch");
  double n = static_cast<double>(e.count);
  for (std::size_t j = 0; j < e.vec.size(); ++j)
    e.vec[j] = (e.vec[j] * n + embedding[j]) / (n + 1.0);
  ++e.count;
}

std::vector<NamedArray> PrototypeBank::to_entries() const {
  std::vector<NamedArray> out;
  std::vector<double> counts;
  for (const auto& [cls, e] : classes) {
    out.push_back({std::to_string(cls), DenseArray({e.vec.size()}, e.vec)});
    counts.push_back(static_cast<double>(e.count));
  }
  if (!counts.empty())
    out.push_back({"counts", DenseArray({counts.size()}, counts)});
  return out;
}

PrototypeBank PrototypeBank::from_entries(const std::vector<NamedArray>& entries) {
  PrototypeBank bank;
  std::vector<double> counts;
  for (const auto& e : entries) {
    if (e.name == "counts") {
      counts = e.array.data;
      continue;
    }
    Entry entry;
    entry.vec = e.array.data;
    entry.count = 1;
    bank.classes[std::stoi(e.name)] = std::move(entry);
  }
  if (!counts.empty()) {
    if (counts.size() != bank.classes.size())
      throw std::runtime_error("prototype bank: count vector misaligned");
    std::size_t i = 0;
    for (auto& [cls, e] : bank.classes) e.count = static_cast<std::size_t>(counts[i++]);
  }
  return bank;
}

PrototypeBank aggregate_prototypes(const std::vector<PrototypeBank>& banks,
                                   bool divide_by_contributor_count) {
  PrototypeBank global;
  std::map<int, std::size_t> totals;
  std::map<int, std::size_t> contributors;
  for (const auto& b : banks)
    for (const auto& [cls, e] : b.classes) {
      if (e.count == 0) continue;
      totals[cls] += e.count;
      contributors[cls] += 1;
    }
  for (const auto& [cls, total] : totals) {
    if (total == 0) continue;
    PrototypeBank::Entry agg;
    agg.count = total;
    for (const auto& b : banks) {
      auto it = b.classes.find(cls);
      if (it == b.classes.end() || it->second.count == 0) continue;
      double w = static_cast<double>(it->second.count) / static_cast<double>(total);
      if (agg.vec.empty()) agg.vec.assign(it->second.vec.size(), 0.0);
      if (agg.vec.size() != it->second.vec.size())
        throw std::invalid_argument("aggregate_prototypes: dimension mismatch");
      for (std::size_t j = 0; j < agg.vec.size(); ++j)
        agg.vec[j] += w * it->second.vec[j];
    }
    if (divide_by_contributor_count) {
      double inv = 1.0 / static_cast<double>(contributors[cls]);
      for (double& v : agg.vec) v *= inv;
    }
    global.classes[cls] = std::move(agg);
  }
  return global;
}

PrototypeBank momentum_update(const PrototypeBank& prev, const PrototypeBank& fresh,
                              double kappa) {
  if (kappa < 0.0 || kappa > 1.0)
    throw std::invalid_argument("momentum_update: kappa outside [0, 1]");
  PrototypeBank out;
  out.round = prev.round + 1;
  for (const auto& [cls, e] : prev.classes) out.classes[cls] = e;
  for (const auto& [cls, e] : fresh.classes) {
    auto it = out.classes.find(cls);
    if (it == out.classes.end()) {
      out.classes[cls] = e;
      continue;
    }
    if (it->second.vec.size() != e.vec.size())
      throw std::invalid_argument("momentum_update: dimension mismatch");
    for (std::size_t j = 0; j < e.vec.size(); ++j)
      it->second.vec[j] = kappa * it->second.vec[j] + (1.0 - kappa) * e.vec[j];
    it->second.count = e.count;
  }
  return out;
}

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  if (pos + 8 > b.size()) throw std::runtime_error("uplink: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
  pos += 8;
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_uplink(const PrototypeBank& bank) {
  std::vector<std::uint8_t> out;
  put_u64(out, bank.classes.size());
  std::size_t d = bank.dim();
  put_u64(out, d);
  for (const auto& [cls, e] : bank.classes) {
    put_u64(out, static_cast<std::uint64_t>(cls));
    put_u64(out, e.count);
    for (double v : e.vec) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      put_u64(out, bits);
    }
  }
  return out;
}

PrototypeBank decode_uplink(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  PrototypeBank bank;
  std::uint64_t n = get_u64(bytes, pos);
  std::uint64_t d = get_u64(bytes, pos);
  for (std::uint64_t i = 0; i < n; ++i) {
    int cls = static_cast<int>(get_u64(bytes, pos));
    PrototypeBank::Entry e;
    e.count = get_u64(bytes, pos);
    e.vec.resize(d);
    for (std::uint64_t j = 0; j < d; ++j) {
      std::uint64_t bits = get_u64(bytes, pos);
      double v;
      std::memcpy(&v, &bits, 8);
      e.vec[j] = v;
    }
    bank.classes[cls] = std::move(e);
  }
  return bank;
}

}  // namespace ssfl
