#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "sqkd/amplitude.hpp"
#include "sqkd/error.hpp"
#include "sqkd/factorized.hpp"
#include "sqkd/fourier.hpp"

namespace sqkd {

struct SchmidtDecomposition {
  std::vector<double> coefficients;  ///< c_i >= 0, descending; sum c_i^2 = 1
  Grid1D signal_grid;
  Grid1D idler_grid;
  Basis basis = Basis::momentum;
  Eigen::MatrixXcd signal_modes;  ///< columns normalized as sum |u|^2 step = 1
  Eigen::MatrixXcd idler_modes;
  double entropy = 0.0;         ///< -sum c^2 log2 c^2, bits
  double schmidt_number = 1.0;  ///< 1 / sum c^4
  double concurrence = 0.0;     ///< sqrt(2 (1 - sum c^4))
  bool truncated = false;       ///< requested more modes than the grid rank
  std::string warning;
};

namespace detail {

inline void fill_spectrum_measures(SchmidtDecomposition& d, const std::vector<double>& all) {
  double s4 = 0.0, h = 0.0;
  for (double c : all) {
    const double p = c * c;
    s4 += p * p;
    h -= plogp(p);
  }
  d.entropy = std::max(h, 0.0);
  d.schmidt_number = 1.0 / s4;
  d.concurrence = std::sqrt(std::max(2.0 * (1.0 - s4), 0.0));
}

}  // namespace detail

/// SVD of f sqrt(ds di). Entropy, Schmidt number and concurrence use the full
/// spectrum; only the first `max_modes` modes are returned.
inline SchmidtDecomposition schmidt_decompose(const JointAmplitude& amp, std::size_t max_modes = 16) {
  const double total = amp.total_probability();
  if (std::abs(total - 1.0) > 1e-6) throw NumericalError("Schmidt decomposition needs a normalized amplitude");
  const Eigen::MatrixXcd m = amp.values * std::sqrt(amp.cell());
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  std::vector<double> all(sv.data(), sv.data() + sv.size());
  double norm = 0.0;
  for (double c : all) norm += c * c;
  for (double& c : all) c /= std::sqrt(norm);

  SchmidtDecomposition d;
  d.signal_grid = amp.signal_grid;
  d.idler_grid = amp.idler_grid;
  d.basis = amp.signal_basis;
  detail::fill_spectrum_measures(d, all);
  const auto rank = static_cast<std::size_t>(sv.size());
  std::size_t keep = max_modes;
  if (keep > rank) {
    keep = rank;
    d.truncated = true;
    d.warning = "requested " + std::to_string(max_modes) + " modes but the grid rank is " + std::to_string(rank);
  }
  d.coefficients.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(keep));
  const auto k = static_cast<Eigen::Index>(keep);
  d.signal_modes = svd.matrixU().leftCols(k) / std::sqrt(amp.signal_grid.step());
  // f = sum c u v^T with v = conj of the right singular vectors.
  d.idler_modes = svd.matrixV().leftCols(k).conjugate() / std::sqrt(amp.idler_grid.step());
  return d;
}

/// Normalized Hermite-Gauss functions psi_n(x) = H_n(x/w) exp(-x^2/(2w^2)) / sqrt(2^n n! sqrt(pi) w),
/// evaluated for n = 0..count-1 by the stable three-term recurrence.
inline std::vector<double> hermite_gauss(double x, double width, std::size_t count) {
  std::vector<double> out(count);
  if (count == 0) return out;
  const double u = x / width;
  out[0] = std::exp(-0.5 * u * u) / std::sqrt(std::sqrt(std::numbers::pi) * width);
  if (count > 1) out[1] = std::numbers::sqrt2 * u * out[0];
  for (std::size_t n = 1; n + 1 < count; ++n) {
    const double dn = static_cast<double>(n);
    out[n + 1] = std::sqrt(2.0 / (dn + 1.0)) * u * out[n] - std::sqrt(dn / (dn + 1.0)) * out[n - 1];
  }
  return out;
}

/// Kernel exp(-(x+y)^2/(4a^2) - (x-y)^2/(4b^2)): |f|^2 has std a in x+y and b in x-y.
/// Schmidt coefficients c_n = sqrt(1 - mu^2) |mu|^n with mu = (a - b)/(a + b); the
/// modes are Hermite-Gauss functions of width sqrt(ab), the idler mode carrying sign(mu)^n.
struct GaussianSchmidtModel {
  double sum_width = 1.0;
  double difference_width = 1.0;

  double mu() const { return (sum_width - difference_width) / (sum_width + difference_width); }
  double mode_width() const { return std::sqrt(sum_width * difference_width); }
  double coefficient(std::size_t n) const {
    const double m = std::abs(mu());
    return std::sqrt(1.0 - m * m) * std::pow(m, static_cast<double>(n));
  }
  /// Leading coefficients until the remaining weight mu^(2n) drops below `tail`.
  std::vector<double> spectrum(double tail = 1e-9, std::size_t max_modes = 1'000'000) const {
    std::vector<double> c;
    const double m2 = mu() * mu();
    double rest = 1.0;
    while (rest >= tail && c.size() < max_modes) {
      c.push_back(coefficient(c.size()));
      rest *= m2;
    }
    return c;
  }
  double schmidt_number() const {
    const double r = sum_width / difference_width;
    return 0.5 * (r + 1.0 / r);
  }
  double entropy() const {
    const double m2 = mu() * mu();
    if (m2 == 0.0) return 0.0;
    return -std::log2(1.0 - m2) - m2 / (1.0 - m2) * std::log2(m2);
  }
  double idler_sign(std::size_t n) const { return (mu() < 0.0 && n % 2 == 1) ? -1.0 : 1.0; }

  double kernel(double x, double y) const {
    const double s = x + y, d = x - y;
    return std::exp(-s * s / (4.0 * sum_width * sum_width) - d * d / (4.0 * difference_width * difference_width));
  }
};

/// Double-Gaussian surrogate of the realistic momentum amplitude: the sum width
/// is 1/w0 exactly and the difference width is the Gaussian of equal entropy
/// to |phi_L|^2.
inline GaussianSchmidtModel gaussian_schmidt_model(const SourceParams& p, const FactorizedResolution& res = {}) {
  const double h = phase_matching_profile(p, res).entropy_bits();
  return {pump_width(p), std::exp2(h) / std::sqrt(2.0 * std::numbers::pi * std::numbers::e)};
}

/// Spectrum of the Gaussian model in the form returned by schmidt_decompose,
/// with modes sampled on `grid`.
inline SchmidtDecomposition schmidt_decompose(const GaussianSchmidtModel& model, const Grid1D& grid,
                                              std::size_t max_modes = 16) {
  SchmidtDecomposition d;
  d.signal_grid = d.idler_grid = grid;
  d.basis = Basis::momentum;
  d.entropy = model.entropy();
  d.schmidt_number = model.schmidt_number();
  d.concurrence = std::sqrt(std::max(2.0 * (1.0 - 1.0 / d.schmidt_number), 0.0));
  const auto n = static_cast<Eigen::Index>(grid.size());
  const auto k = static_cast<Eigen::Index>(max_modes);
  d.signal_modes.resize(n, k);
  d.idler_modes.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto hg = hermite_gauss(grid[static_cast<std::size_t>(i)], model.mode_width(), max_modes);
    for (Eigen::Index j = 0; j < k; ++j) {
      d.signal_modes(i, j) = hg[static_cast<std::size_t>(j)];
      d.idler_modes(i, j) = model.idler_sign(static_cast<std::size_t>(j)) * hg[static_cast<std::size_t>(j)];
    }
  }
  for (std::size_t j = 0; j < max_modes; ++j) d.coefficients.push_back(model.coefficient(j));
  return d;
}

/// Leading Schmidt modes in both bases, as needed by the log-negativity model.
struct ModeSet {
  Eigen::VectorXd coefficients;  ///< D leading coefficients, not renormalized
  double discarded_weight = 0.0;  ///< 1 - sum of the retained c^2
  Grid1D momentum_grid;
  Grid1D position_grid;
  Eigen::MatrixXcd signal_momentum, idler_momentum;  ///< N x D
  Eigen::MatrixXcd signal_position, idler_position;

  std::size_t dimension() const { return static_cast<std::size_t>(coefficients.size()); }
};

/// Takes the first `dim` modes of a momentum-basis decomposition and
/// transforms them to the position basis.
inline ModeSet mode_set(const SchmidtDecomposition& d, std::size_t dim) {
  require(d.basis == Basis::momentum, "mode set needs momentum-basis modes");
  require(d.signal_grid == d.idler_grid, "mode set needs a common signal/idler grid");
  require(dim >= 1 && dim <= d.coefficients.size(), "mode-set dimension exceeds the available modes");
  ModeSet m;
  const auto k = static_cast<Eigen::Index>(dim);
  m.coefficients = Eigen::Map<const Eigen::VectorXd>(d.coefficients.data(), k);
  m.discarded_weight = std::max(1.0 - m.coefficients.squaredNorm(), 0.0);
  m.momentum_grid = d.signal_grid;
  m.position_grid = d.signal_grid.reciprocal();
  m.signal_momentum = d.signal_modes.leftCols(k);
  m.idler_momentum = d.idler_modes.leftCols(k);
  const CenteredDft dft(d.signal_grid);
  auto transform = [&](const Eigen::MatrixXcd& modes) {
    Eigen::MatrixXcd out(modes.rows(), modes.cols());
    std::vector<cdouble> line(static_cast<std::size_t>(modes.rows()));
    for (Eigen::Index j = 0; j < modes.cols(); ++j) {
      for (Eigen::Index i = 0; i < modes.rows(); ++i) line[static_cast<std::size_t>(i)] = modes(i, j);
      const auto t = dft(line);
      for (Eigen::Index i = 0; i < modes.rows(); ++i) out(i, j) = t[static_cast<std::size_t>(i)];
    }
    return out;
  };
  m.signal_position = transform(m.signal_momentum);
  m.idler_position = transform(m.idler_momentum);
  return m;
}

/// Analytic mode set of the Gaussian model. Hermite-Gauss functions are
/// eigenfunctions of the transform: psi_n of width w maps to i^n psi_n of width 1/w.
inline ModeSet mode_set(const GaussianSchmidtModel& model, std::size_t dim, std::size_t points = 4096) {
  require(dim >= 1, "mode-set dimension must be positive");
  const double w = model.mode_width();
  const double reach = std::sqrt(2.0 * static_cast<double>(dim)) + 8.0;
  ModeSet m;
  m.momentum_grid = Grid1D::symmetric(points, reach * w);
  m.position_grid = Grid1D::symmetric(points, reach / w);
  const auto k = static_cast<Eigen::Index>(dim);
  m.coefficients.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) m.coefficients(j) = model.coefficient(static_cast<std::size_t>(j));
  m.discarded_weight = std::pow(std::abs(model.mu()), 2.0 * static_cast<double>(dim));
  const auto n = static_cast<Eigen::Index>(points);
  m.signal_momentum.resize(n, k);
  m.idler_momentum.resize(n, k);
  m.signal_position.resize(n, k);
  m.idler_position.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto hk = hermite_gauss(m.momentum_grid[static_cast<std::size_t>(i)], w, dim);
    const auto hr = hermite_gauss(m.position_grid[static_cast<std::size_t>(i)], 1.0 / w, dim);
    cdouble phase = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double s = model.idler_sign(static_cast<std::size_t>(j));
      m.signal_momentum(i, j) = hk[static_cast<std::size_t>(j)];
      m.idler_momentum(i, j) = s * hk[static_cast<std::size_t>(j)];
      m.signal_position(i, j) = phase * hr[static_cast<std::size_t>(j)];
      m.idler_position(i, j) = s * phase * hr[static_cast<std::size_t>(j)];
      phase *= cdouble(0.0, 1.0);
    }
  }
  return m;
}

}  // namespace sqkd
