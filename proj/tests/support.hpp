#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "sqkd/amplitude.hpp"
#include "sqkd/source.hpp"

namespace sqkd::test {

/// Seeded value generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  std::size_t integer(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin() { return uniform(0.0, 1.0) < 0.5; }

  /// Random joint probability table with roughly `density` of the cells nonzero.
  Eigen::MatrixXd probability_table(std::size_t rows, std::size_t cols, double density = 1.0) {
    Eigen::MatrixXd p(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < p.size(); ++i) p(i) = uniform(0.0, 1.0) < density ? uniform(0.0, 1.0) : 0.0;
    if (p.sum() == 0.0) p(0) = 1.0;
    return p / p.sum();
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Runs `fn` on `cases` generators derived from `seed`; failures name the case.
template <class Fn>
void for_all(std::size_t cases, std::uint64_t seed, Fn&& fn) {
  for (std::size_t i = 0; i < cases; ++i) {
    SCOPED_TRACE("property case " + std::to_string(i) + " (seed " + std::to_string(seed) + ")");
    Gen g(seed * 1000003u + i);
    fn(g);
    if (::testing::Test::HasFailure()) return;
  }
}

/// Bivariate normal density on a square grid of +-`sigmas` standard deviations.
inline JointDistribution gaussian_joint(double sx, double sy, double rho, std::size_t n = 512, double sigmas = 9.0) {
  JointDistribution d;
  d.signal_grid = Grid1D::symmetric(n, sigmas * sx);
  d.idler_grid = Grid1D::symmetric(n, sigmas * sy);
  d.density.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double det = 1.0 - rho * rho;
  const double c = 1.0 / (2.0 * std::numbers::pi * sx * sy * std::sqrt(det));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double x = d.signal_grid[i] / sx, y = d.idler_grid[j] / sy;
      d.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          c * std::exp(-(x * x - 2.0 * rho * x * y + y * y) / (2.0 * det));
    }
  return d;
}

/// Source weak enough in entanglement for a direct 1024^2 grid.
inline SourceParams weak_source() {
  SourceParams p = default_source();
  p.wavenumber_per_mm = 10.0;
  p.crystal_length_mm = 2.0;
  p.pump_waist_mm = 1.0;
  return p;
}

}  // namespace sqkd::test
