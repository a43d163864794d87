#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace xmq {

inline constexpr const char* kVersion = "0.1.0";

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Base class for all library errors.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable or unwritable file.
class IoError : public Error {
  using Error::Error;
};

// Bad magic, bad version, or otherwise malformed header.
class FormatError : public Error {
  using Error::Error;
};

// File shorter than its header declares.
class TruncationError : public Error {
  using Error::Error;
};

// NaN or Inf where a finite value is required.
class NonFiniteError : public Error {
  using Error::Error;
};

// Inconsistent shapes or invalid sizes.
class DimensionError : public Error {
  using Error::Error;
};

// Numerical failure inside an iterative solver.
class SolverError : public Error {
  using Error::Error;
};

// Input data that cannot be processed, e.g. a zero-norm item.
class DegenerateDataError : public Error {
  using Error::Error;
};

inline bool all_finite(const Matrix& m) {
  return m.allFinite();
}

// SplitMix64 step; used to derive independent seeds from one master seed.
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Chunk boundaries depend only on (n, threads), so results that
// write disjoint ranges are reproducible for a fixed thread count.
inline void parallel_for_chunks(std::size_t n, int threads,
                                const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  int workers = threads;
  if (workers <= 0) workers = 1;
  if (static_cast<std::size_t>(workers) > n) workers = static_cast<int>(n);
  if (workers == 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::size_t begin = static_cast<std::size_t>(w) * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end);
  }
  for (auto& t : pool) t.join();
}

}  // namespace xmq
