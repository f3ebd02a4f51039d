#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ssfl {

// Deterministic seed derivation. Every random decision in a run flows from
// the trial seed through named streams so that client loops can execute in
// any order (or concurrently) without changing results.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t stream_seed(std::uint64_t global, std::uint64_t client,
                                 std::uint64_t round, std::string_view tag) {
  std::uint64_t h = splitmix64(global);
  h = splitmix64(h ^ (client + 0x9e37));
  h = splitmix64(h ^ (round * 0x1000003ull));
  h = splitmix64(h ^ hash_str(tag));
  return h;
}

// mt19937_64 wrapper with hand-rolled distributions so replay is
// bit-identical regardless of standard library internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1)
  double uniform() {
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(gen_() % span);
  }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0, u2 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double gaussian(double mean, double std) { return mean + std * gaussian(); }

  // Marsaglia-Tsang, with the alpha < 1 boost.
  double gamma(double alpha) {
    if (alpha < 1.0) {
      double u = 0.0;
      do {
        u = uniform();
      } while (u <= 1e-300);
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    double d = alpha - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x = gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 1e-300 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v;
    }
  }

  std::vector<double> dirichlet(double concentration, std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& v : w) {
      v = gamma(concentration);
      total += v;
    }
    if (total <= 0.0) total = 1.0;
    for (auto& v : w) v /= total;
    return w;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ssfl
