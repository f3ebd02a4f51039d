#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ssfl/dense_array.hpp"
#include "ssfl/serialize.hpp"

namespace ssfl {

// Per-class embedding centroids with sample counts; the only payload the
// clients and server exchange.
struct PrototypeBank {
  struct Entry {
    std::vector<double> vec;
    std::size_t count = 0;
  };
  std::map<int, Entry> classes;
  long round = 0;

  std::size_t dim() const;
  bool empty() const { return classes.empty(); }

  void add(int cls, const std::vector<double>& embedding);  // running mean
  std::vector<NamedArray> to_entries() const;
  static PrototypeBank from_entries(const std::vector<NamedArray>& entries);
};

// Count-weighted mean across client banks; weights per class sum to 1.
// divide_by_contributor_count additionally divides each class by the number
// of contributing clients (shrinks the norm; off by default).
PrototypeBank aggregate_prototypes(const std::vector<PrototypeBank>& banks,
                                   bool divide_by_contributor_count = false);

// Elementwise EMA across rounds: classes only in prev carry forward,
// classes only in fresh enter at full value.
PrototypeBank momentum_update(const PrototypeBank& prev, const PrototypeBank& fresh,
                              double kappa);

// Wire form of one client's uplink: (class id, count, vector) triples.
std::vector<std::uint8_t> encode_uplink(const PrototypeBank& bank);
PrototypeBank decode_uplink(const std::vector<std::uint8_t>& bytes);

}  // namespace ssfl
