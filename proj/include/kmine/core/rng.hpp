#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace kmine {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// FNV-1a, stable across platforms.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_bytes(const void* data, std::size_t n,
                                 std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derives an independent seed for a named stream ("split", "augment", "init", ...).
inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view name) {
  return splitmix64(seed ^ fnv1a(name));
}

inline std::uint64_t sub_seed(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return splitmix64(sub_seed(seed, name) + splitmix64(index));
}

/// Uniform double in [0,1) from the top 53 bits; independent of the standard library's
/// distribution implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  // Lemire-free rejection keeps it exact and simple.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

inline double normal(Rng& rng) {
  // Box-Muller; one value per call.
  double u1 = uniform01(rng);
  if (u1 < 1e-300) u1 = 1e-300;
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

template <typename RandomIt>
void shuffle(RandomIt first, RandomIt last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(uniform_index(rng, static_cast<std::uint64_t>(i + 1)));
    std::swap(first[i], first[j]);
  }
}

std::string rng_state(const Rng& rng);
void set_rng_state(Rng& rng, const std::string& state);

}  // namespace kmine
