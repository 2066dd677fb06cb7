#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "bmsense/linalg.hpp"

namespace bmsense {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Sub-seed for an independent stream identified by (seed, ids...). Workers
/// derive their streams from the trial index, never from scheduling order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

/// Fills m in row-major order with i.i.d. N(mean, stddev^2) draws.
inline void fill_normal(Matrix& m, Rng& rng, double mean = 0.0, double stddev = 1.0) {
  std::normal_distribution<double> dist(mean, stddev);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

inline Matrix normal_matrix(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
  Matrix m(rows, cols);
  fill_normal(m, rng, 0.0, stddev);
  return m;
}

}  // namespace bmsense
