#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "sqkd/error.hpp"
#include "sqkd/fourier.hpp"
#include "sqkd/grid.hpp"
#include "sqkd/source.hpp"

namespace sqkd {

enum class Basis { momentum, position };
enum class Photon { signal, idler };

inline const char* to_string(Basis b) { return b == Basis::momentum ? "momentum" : "position"; }
inline Basis conjugate(Basis b) { return b == Basis::momentum ? Basis::position : Basis::momentum; }
inline Photon partner(Photon p) { return p == Photon::signal ? Photon::idler : Photon::signal; }

/// Sampled biphoton amplitude; rows index the signal grid, columns the idler grid.
struct JointAmplitude {
  Basis signal_basis = Basis::momentum;
  Basis idler_basis = Basis::momentum;
  Grid1D signal_grid;
  Grid1D idler_grid;
  Eigen::MatrixXcd values;
  double normalization = 1.0;  ///< C such that sum |f|^2 ds di = 1

  double cell() const { return signal_grid.step() * idler_grid.step(); }
  double total_probability() const { return values.cwiseAbs2().sum() * cell(); }
};

/// Gridded joint probability density, same layout as JointAmplitude.
struct JointDistribution {
  Basis signal_basis = Basis::momentum;
  Basis idler_basis = Basis::momentum;
  Grid1D signal_grid;
  Grid1D idler_grid;
  Eigen::MatrixXd density;

  double cell() const { return signal_grid.step() * idler_grid.step(); }
  double total_probability() const { return density.sum() * cell(); }
  const Grid1D& grid(Photon p) const { return p == Photon::signal ? signal_grid : idler_grid; }
};

struct Density1D {
  Grid1D grid;
  Eigen::VectorXd values;

  double total_probability() const { return values.sum() * grid.step(); }
};

/// Symmetric momentum grid with half-extent coverage * max(1/w0, sqrt(8 pi K/L)).
inline Grid1D auto_grid(const SourceParams& params, std::size_t count, double coverage_factor = 5.0) {
  params.validate();
  require(count >= 64 && is_power_of_two(count), "auto_grid needs a power of two >= 64");
  require(coverage_factor >= 1.0, "coverage factor must be >= 1");
  const double half = coverage_factor * std::max(pump_width(params), phase_matching_width(params));
  return Grid1D::symmetric(count, half);
}

/// Samples per narrower characteristic width on a grid; build_amplitude needs >= 8.
inline double samples_across_narrow_width(const SourceParams& params, const Grid1D& grid) {
  return std::min(pump_width(params), phase_matching_width(params)) / grid.step();
}

/// Normalizes an amplitude in place so that sum |f|^2 * cell = 1.
inline void normalize(JointAmplitude& amp) {
  const double total = amp.total_probability();
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("amplitude has zero or non-finite norm on the grid");
  const double c = 1.0 / std::sqrt(total);
  amp.values *= c;
  amp.normalization *= c;
}

/// Samples an arbitrary kernel f(x_s, x_i) and normalizes it.
template <class Kernel>
JointAmplitude sample_amplitude(Kernel&& kernel, const Grid1D& signal, const Grid1D& idler,
                                Basis basis = Basis::momentum) {
  JointAmplitude amp;
  amp.signal_basis = amp.idler_basis = basis;
  amp.signal_grid = signal;
  amp.idler_grid = idler;
  amp.values.resize(static_cast<Eigen::Index>(signal.size()), static_cast<Eigen::Index>(idler.size()));
  for (std::size_t i = 0; i < signal.size(); ++i)
    for (std::size_t j = 0; j < idler.size(); ++j)
      amp.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          std::complex<double>(kernel(signal[i], idler[j]));
  amp.normalization = 1.0;
  normalize(amp);
  return amp;
}

/// f(k_s, k_i) = C alpha(k_s + k_i) phi_L(k_s - k_i) on a square momentum grid.
inline JointAmplitude build_amplitude(const SourceParams& params, const Grid1D& grid) {
  params.validate();
  const double samples = samples_across_narrow_width(params, grid);
  if (samples < 8.0) {
    throw NumericalError("grid too coarse for the biphoton amplitude: " + std::to_string(samples) +
                         " samples across the narrower width (need >= 8); widths 1/w0 = " +
                         std::to_string(pump_width(params)) + " and sqrt(8 pi K/L) = " +
                         std::to_string(phase_matching_width(params)) +
                         " rad/mm. Use the factorized model for strongly entangled sources.");
  }
  return sample_amplitude(
      [&](double ks, double ki) { return pump_envelope(params, ks + ki) * phase_matching(params, ks - ki); },
      grid, grid, Basis::momentum);
}

/// Two-dimensional unitary transform from momentum to position amplitudes.
inline JointAmplitude to_position_basis(const JointAmplitude& amp) {
  require(amp.signal_basis == Basis::momentum && amp.idler_basis == Basis::momentum,
          "to_position_basis expects a momentum-basis amplitude");
  JointAmplitude out;
  out.signal_basis = out.idler_basis = Basis::position;
  out.signal_grid = amp.signal_grid.reciprocal();
  out.idler_grid = amp.idler_grid.reciprocal();
  out.values = centered_dft_2d(amp.values, amp.signal_grid, amp.idler_grid);
  out.normalization = amp.normalization;
  return out;
}

/// Transforms only the idler axis, giving the (k_s, r_i) mixed amplitude.
inline JointAmplitude idler_to_position(const JointAmplitude& amp) {
  require(amp.idler_basis == Basis::momentum, "idler axis is already in the position basis");
  JointAmplitude out = amp;
  out.idler_basis = Basis::position;
  out.idler_grid = amp.idler_grid.reciprocal();
  const CenteredDft dft(amp.idler_grid);
  std::vector<cdouble> line(amp.idler_grid.size());
  for (Eigen::Index r = 0; r < amp.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < amp.values.cols(); ++c) line[static_cast<std::size_t>(c)] = amp.values(r, c);
    const auto t = dft(line);
    for (Eigen::Index c = 0; c < amp.values.cols(); ++c) out.values(r, c) = t[static_cast<std::size_t>(c)];
  }
  return out;
}

inline JointDistribution to_distribution(const JointAmplitude& amp) {
  JointDistribution d;
  d.signal_basis = amp.signal_basis;
  d.idler_basis = amp.idler_basis;
  d.signal_grid = amp.signal_grid;
  d.idler_grid = amp.idler_grid;
  d.density = amp.values.cwiseAbs2();
  return d;
}

inline Density1D marginal(const JointDistribution& dist, Photon which) {
  Density1D m;
  if (which == Photon::signal) {
    m.grid = dist.signal_grid;
    m.values = dist.density.rowwise().sum() * dist.idler_grid.step();
  } else {
    m.grid = dist.idler_grid;
    m.values = dist.density.colwise().sum().transpose() * dist.signal_grid.step();
  }
  return m;
}

}  // namespace sqkd
