#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "sqkd/error.hpp"

namespace sqkd {

/// A normalized 1-D probability density used as one factor of a
/// sum/difference factorized joint density. Either an exact Gaussian or a
/// table on a uniform grid (optionally with an exact pdf evaluator and
/// analytic tail corrections beyond the table).
class Profile1D {
 public:
  struct Node {
    double x;
    double weight;  ///< pdf(x) times the quadrature weight
  };

  static Profile1D gaussian(double sigma, std::size_t points = 512, double half_width_sigmas = 12.0) {
    require(sigma > 0.0, "Gaussian profile needs a positive width");
    Profile1D p;
    p.kind_ = Kind::gaussian;
    p.sigma_ = sigma;
    p.x0_ = -half_width_sigmas * sigma;
    p.step_ = 2.0 * half_width_sigmas * sigma / static_cast<double>(points - 1);
    p.pdf_.resize(points);
    for (std::size_t i = 0; i < points; ++i) p.pdf_[i] = p.pdf(p.x(i));
    p.build_cdf();
    return p;
  }

  /// Table of an unnormalized density on x0 + i*step. `tail_mass_each_side`
  /// and `tail_second_moment` are the (unnormalized) contributions beyond the
  /// table edges, used for the normalization, cdf and variance.
  static Profile1D tabulated(double x0, double step, std::vector<double> values,
                             double tail_mass_each_side = 0.0, double tail_second_moment = 0.0,
                             std::function<double(double)> exact_unnormalized = {}) {
    require(values.size() >= 3 && step > 0.0, "tabulated profile needs at least three points");
    Profile1D p;
    p.kind_ = Kind::tabulated;
    p.x0_ = x0;
    p.step_ = step;
    double mass = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double w = (i == 0 || i + 1 == values.size()) ? 0.5 : 1.0;
      mass += w * values[i] * step;
    }
    mass += 2.0 * tail_mass_each_side;
    if (!(mass > 0.0) || !std::isfinite(mass)) throw NumericalError("profile has no mass");
    for (double& v : values) v /= mass;
    p.pdf_ = std::move(values);
    p.tail_mass_ = tail_mass_each_side / mass;
    p.tail_second_moment_ = tail_second_moment / mass;
    if (exact_unnormalized)
      p.exact_ = [f = std::move(exact_unnormalized), mass](double z) { return f(z) / mass; };
    p.build_cdf();
    return p;
  }

  bool is_gaussian() const { return kind_ == Kind::gaussian; }
  double gaussian_sigma() const { return sigma_; }
  std::size_t size() const { return pdf_.size(); }
  double x(std::size_t i) const { return x0_ + step_ * static_cast<double>(i); }
  double step() const { return step_; }
  double table_min() const { return x0_; }
  double table_max() const { return x(pdf_.size() - 1); }
  const std::vector<double>& table() const { return pdf_; }

  double pdf(double z) const {
    if (kind_ == Kind::gaussian)
      return std::exp(-0.5 * z * z / (sigma_ * sigma_)) / (sigma_ * std::sqrt(2.0 * std::numbers::pi));
    if (exact_) return exact_(z);
    return interpolate(pdf_, z, 0.0, 0.0);
  }

  double cdf(double z) const {
    if (kind_ == Kind::gaussian) return 0.5 * std::erfc(-z / (sigma_ * std::numbers::sqrt2));
    return interpolate(cdf_, z, 0.0, 1.0);
  }

  double entropy_bits() const {
    if (kind_ == Kind::gaussian)
      return 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * sigma_ * sigma_);
    double h = 0.0;
    for (std::size_t i = 0; i < pdf_.size(); ++i) {
      const double w = (i == 0 || i + 1 == pdf_.size()) ? 0.5 : 1.0;
      if (pdf_[i] > 0.0) h -= w * pdf_[i] * std::log2(pdf_[i]);
    }
    return h * step_;
  }

  double mean() const {
    if (kind_ == Kind::gaussian) return 0.0;
    double m = 0.0;
    for (std::size_t i = 0; i < pdf_.size(); ++i) m += pdf_[i] * x(i);
    return m * step_;
  }

  double variance() const {
    if (kind_ == Kind::gaussian) return sigma_ * sigma_;
    double m2 = 0.0;
    for (std::size_t i = 0; i < pdf_.size(); ++i) m2 += pdf_[i] * x(i) * x(i);
    const double mu = mean();
    return m2 * step_ + tail_second_moment_ - mu * mu;
  }

  /// Smallest symmetric half-width around 0 outside which at most `tail` mass lies.
  double half_width(double tail) const {
    if (kind_ == Kind::gaussian) {
      // Bisection on the two-sided Gaussian tail.
      double lo = 0.0, hi = 40.0 * sigma_;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (std::erfc(mid / (sigma_ * std::numbers::sqrt2)) > tail ? lo : hi) = mid;
      }
      return hi;
    }
    const double lower = 0.5 * tail;
    const double upper = 1.0 - 0.5 * tail;
    return std::max(-quantile(lower), quantile(upper));
  }

  double quantile(double prob) const {
    if (kind_ == Kind::gaussian) {
      double lo = -40.0 * sigma_, hi = 40.0 * sigma_;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < prob ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), prob);
    if (it == cdf_.begin()) return x0_;
    if (it == cdf_.end()) return table_max();
    const std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
    const double c0 = cdf_[i - 1], c1 = cdf_[i];
    const double f = c1 > c0 ? (prob - c0) / (c1 - c0) : 0.0;
    return x(i - 1) + f * step_;
  }

  /// Quadrature nodes covering all but `tail` of the tabulated mass.
  std::vector<Node> nodes(double tail = 1e-9) const {
    const double hw = kind_ == Kind::gaussian
                          ? half_width(tail)
                          : std::max(-quantile(tail_mass_ + 0.5 * tail), quantile(1.0 - tail_mass_ - 0.5 * tail));
    std::vector<Node> out;
    for (std::size_t i = 0; i < pdf_.size(); ++i) {
      const double xi = x(i);
      if (std::abs(xi) > hw) continue;
      if (pdf_[i] > 0.0) out.push_back({xi, pdf_[i] * step_});
    }
    if (out.empty()) throw NumericalError("profile has no quadrature nodes");
    return out;
  }

 private:
  enum class Kind { gaussian, tabulated };

  double interpolate(const std::vector<double>& table, double z, double below, double above) const {
    const double t = (z - x0_) / step_;
    if (t < 0.0) return below;
    const double last = static_cast<double>(table.size() - 1);
    if (t >= last) return above;
    const auto i = static_cast<std::size_t>(t);
    const double f = t - static_cast<double>(i);
    return table[i] + f * (table[i + 1] - table[i]);
  }

  void build_cdf() {
    cdf_.resize(pdf_.size());
    double acc = kind_ == Kind::gaussian ? 0.0 : tail_mass_;
    cdf_[0] = acc;
    for (std::size_t i = 1; i < pdf_.size(); ++i) {
      acc += 0.5 * (pdf_[i - 1] + pdf_[i]) * step_;
      cdf_[i] = acc;
    }
  }

  Kind kind_ = Kind::tabulated;
  double sigma_ = 0.0;
  double x0_ = 0.0;
  double step_ = 1.0;
  double tail_mass_ = 0.0;
  double tail_second_moment_ = 0.0;
  std::vector<double> pdf_;
  std::vector<double> cdf_;
  std::function<double(double)> exact_;
};

}  // namespace sqkd
