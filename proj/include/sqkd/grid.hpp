#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "sqkd/error.hpp"

namespace sqkd {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Uniform 1-D sampling grid with a power-of-two number of points.
/// Units are rad/mm for momentum grids and mm for position grids.
class Grid1D {
 public:
  Grid1D() = default;

  Grid1D(std::size_t count, double min, double max) : count_(count), min_(min), max_(max) {
    require(is_power_of_two(count) && count >= 2,
            "grid size must be a power of two >= 2, got " + std::to_string(count));
    require(std::isfinite(min) && std::isfinite(max) && max > min,
            "grid bounds must be finite and strictly increasing");
    step_ = (max_ - min_) / static_cast<double>(count_ - 1);
  }

  static Grid1D symmetric(std::size_t count, double half_extent) {
    return Grid1D(count, -half_extent, half_extent);
  }

  std::size_t size() const { return count_; }
  double min() const { return min_; }
  double max() const { return max_; }
  double step() const { return step_; }
  double operator[](std::size_t i) const { return min_ + step_ * static_cast<double>(i); }

  std::vector<double> values() const {
    std::vector<double> v(count_);
    for (std::size_t i = 0; i < count_; ++i) v[i] = (*this)[i];
    return v;
  }

  /// Conjugate grid of the centered unitary DFT: same size, step 2*pi/(N*step),
  /// centered on the same relative position as this grid.
  Grid1D reciprocal() const {
    const double rstep = 2.0 * std::numbers::pi / (static_cast<double>(count_) * step_);
    const double center = 0.5 * static_cast<double>(count_ - 1);
    return Grid1D(count_, -center * rstep, center * rstep);
  }

  bool operator==(const Grid1D&) const = default;

 private:
  std::size_t count_ = 0;
  double min_ = 0.0;
  double max_ = 0.0;
  double step_ = 0.0;
};

}  // namespace sqkd
