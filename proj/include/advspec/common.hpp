#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace advspec {

// Plain row-major sample matrix, one sample per row. Used at the black-box
// boundary where no gradient information may cross.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  Matrix select_rows(std::span<const std::size_t> indices) const;
  std::size_t argmax(std::size_t r) const;
};

// Seeded random stream. Every stochastic routine takes one explicitly so
// that runs are reproducible from a single seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  std::size_t uniform_index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

  // Textual engine state, for checkpoints.
  std::string state() const;
  void restore(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

// Worker count: ADVSPEC_THREADS if set and positive, else hardware
// concurrency.
std::size_t max_threads();

// Runs fn(i) for i in [0, n) on up to max_threads() threads. Each index is
// handled exactly once; results must not depend on which thread runs it.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace advspec
