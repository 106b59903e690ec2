#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace mta {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent generator keyed by a seed and a path of indices, e.g.
/// (seed, replicate, task). The same key always yields the same stream.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t k : path) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return std::mt19937_64(h);
}

/// m values drawn without replacement (partial Fisher-Yates).
template <class Rng>
std::vector<double> subsample(const std::vector<double>& values, std::size_t m, Rng& rng) {
  std::vector<double> pool = values;
  if (m > pool.size()) m = pool.size();
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(m);
  return pool;
}

/// floor(n * fraction), at least 1.
inline std::size_t half_size(std::size_t n, double fraction) {
  const auto m = static_cast<std::size_t>(static_cast<double>(n) * fraction);
  return m == 0 ? 1 : m;
}

}  // namespace mta
