#pragma once

// Entropies of the full two-dimensional transverse model. Every factor is
// radially symmetric, so all integrals reduce to one-dimensional ones:
//   momentum difference factor  |phi_L|^2 as a function of t = (|q|^2/(4K) - delta) L,
//   position difference factor  |J(c)|^2 with c = K |P|^2 / L, where
//     J(c) = int_1^inf exp(i delta L / v) exp(i c v) dv / v
//   is the radial transform of phi_L (evaluated with Ooura's double-exponential
//   Fourier quadrature).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include "sqkd/amplitude.hpp"
#include "sqkd/error.hpp"
#include "sqkd/source.hpp"

namespace sqkd {

struct TransverseResolution {
  double t_step = 0.01;      ///< momentum difference factor, in units of the phase-mismatch phase
  double t_max = 1e4;
  double w_step = 0.1;       ///< momentum marginal, w = |k|^2 L / K
  double w_max = 5e3;
  std::size_t radial_nodes = 40;  ///< quadrature over the narrow pump factor
  std::size_t angle_nodes = 32;
  double c_min = 1e-12;           ///< position difference factor, c = K |P|^2 / L
  double c_max = 1e6;
  double c_asymptotic = 1e-6;     ///< below this the small-c expansion of J is used
  std::size_t per_decade = 100;
  std::size_t position_marginal_points = 1024;
  std::size_t memory_budget_bytes = std::size_t{1} << 30;

  TransverseResolution refined() const {
    TransverseResolution r = *this;
    r.t_step *= 0.5;
    r.w_step *= 0.5;
    r.radial_nodes *= 2;
    r.angle_nodes *= 2;
    r.per_decade *= 2;
    r.position_marginal_points *= 2;
    return r;
  }
};

/// Entropies in bits for one basis; units are (rad/mm)^2 or mm^2 per photon.
struct TransverseEntropies {
  Basis basis = Basis::momentum;
  double sum_entropy = 0.0;         ///< H of the 2-D sum-coordinate density
  double difference_entropy = 0.0;  ///< H of the 2-D difference-coordinate density
  double joint_entropy = 0.0;       ///< H(x_s, x_i) = H(sum) + H(difference) - 2
  double marginal_entropy = 0.0;
  double mutual_information = 0.0;
};

struct FullTransverse {
  TransverseEntropies momentum;
  TransverseEntropies position;
};

/// log2 |det| of (x_s, x_i) -> (x_s + x_i, x_s - x_i) for d-dimensional x.
inline double sum_difference_jacobian_bits(int dims_per_photon) { return static_cast<double>(dims_per_photon); }

namespace detail {

inline double sinc2_half(double t) {
  if (std::abs(t) < 1e-4) return 1.0 - t * t / 12.0;
  const double s = std::sin(0.5 * t) / (0.5 * t);
  return s * s;
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t per_decade) {
  const auto n = static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * static_cast<double>(per_decade))) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(n - 1));
  return g;
}

/// Trapezoid of f(x) dx over a log grid, written as f(x) x d(ln x).
inline double log_trapezoid(const std::vector<double>& x, const std::vector<double>& f) {
  double acc = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = std::log(x[i] / x[i - 1]);
    acc += 0.5 * h * (f[i - 1] * x[i - 1] + f[i] * x[i]);
  }
  return acc;
}

inline void check_budget(std::size_t points, const TransverseResolution& res, const char* what) {
  const std::size_t bytes = points * 2 * sizeof(double);
  if (bytes > res.memory_budget_bytes)
    throw ParameterError(std::string(what) + " needs " + std::to_string(bytes >> 20) + " MiB (budget " +
                         std::to_string(res.memory_budget_bytes >> 20) +
                         " MiB); coarsen the step or lower the range, e.g. halve the point count");
}

/// e^{-z} I0(z), stable for large z.
inline double scaled_bessel_i0(double z) {
  if (z < 500.0) return boost::math::cyl_bessel_i(0, z) * std::exp(-z);
  return (1.0 + 1.0 / (8.0 * z) + 9.0 / (128.0 * z * z)) / std::sqrt(2.0 * std::numbers::pi * z);
}

}  // namespace detail

/// Radial transform J(c) of the phase-matching function (see file comment).
inline std::complex<double> phase_matching_radial_transform(const SourceParams& p, double c,
                                                            const TransverseResolution& res = {}) {
  const double a = p.collinear_mismatch_per_mm * p.crystal_length_mm;
  if (c < res.c_asymptotic) {
    // J(c) = E1(-ic) + int_0^1 (e^{i a s} - 1)/s ds, E1(-ic) ~ -gamma - ln c + i pi/2.
    std::complex<double> offset = 0.0;
    if (a != 0.0) {
      boost::math::quadrature::tanh_sinh<double> ts;
      const double re = ts.integrate([a](double s) { return s > 0.0 ? (std::cos(a * s) - 1.0) / s : 0.0; }, 0.0, 1.0);
      const double im = ts.integrate([a](double s) { return s > 0.0 ? std::sin(a * s) / s : a; }, 0.0, 1.0);
      offset = {re, im};
    }
    return std::complex<double>(-std::numbers::egamma - std::log(c), 0.5 * std::numbers::pi) + offset;
  }
  // J(c) = e^{ic} int_0^inf F(y) e^{icy} dy with F(y) = e^{i a/(1+y)}/(1+y).
  static thread_local boost::math::quadrature::ooura_fourier_cos<double> cos_int;
  static thread_local boost::math::quadrature::ooura_fourier_sin<double> sin_int;
  auto fr = [a](double y) { return std::cos(a / (1.0 + y)) / (1.0 + y); };
  auto fi = [a](double y) { return std::sin(a / (1.0 + y)) / (1.0 + y); };
  const double rc = cos_int.integrate(fr, c).first;
  const double rs = sin_int.integrate(fr, c).first;
  double ic = 0.0, is = 0.0;
  if (a != 0.0) {
    ic = cos_int.integrate(fi, c).first;
    is = sin_int.integrate(fi, c).first;
  }
  return std::polar(1.0, c) * std::complex<double>(rc - is, ic + rs);
}

/// Full-2-D momentum entropies.
inline TransverseEntropies momentum_entropies_2d(const SourceParams& p, const TransverseResolution& res = {}) {
  p.validate();
  const double k = p.wavenumber_per_mm, l = p.crystal_length_mm;
  const double t0 = -p.collinear_mismatch_per_mm * l;
  require(t0 < res.t_max, "phase-mismatch range does not fit below t_max");
  const auto nt = static_cast<std::size_t>(std::ceil((res.t_max - t0) / res.t_step)) + 1;
  const auto nw = static_cast<std::size_t>(std::ceil(res.w_max / res.w_step)) + 1;
  detail::check_budget(std::max(nt, nw), res, "2-D momentum model");

  // S = int s dt and int s ln s dt from t0 to infinity, s = sinc^2(t/2); the
  // tails use the period-averaged asymptote 2 (1 - cos t) / t^2.
  const double dt = (res.t_max - t0) / static_cast<double>(nt - 1);
  double mass = 0.0, slns = 0.0;
  for (std::size_t i = 0; i < nt; ++i) {
    const double t = t0 + dt * static_cast<double>(i);
    const double s = detail::sinc2_half(t);
    const double w = (i == 0 || i + 1 == nt) ? 0.5 : 1.0;
    mass += w * s * dt;
    if (s > 0.0) slns += w * s * std::log(s) * dt;
  }
  const double tm = res.t_max;
  mass += 2.0 / tm;
  slns -= 2.0 * (2.0 * std::log(tm) + 1.0) / tm;
  const double z = std::numbers::pi * 4.0 * k * mass / l;  // int s d^2q
  TransverseEntropies e;
  e.basis = Basis::momentum;
  const double sigma = pump_width(p);
  e.sum_entropy = std::log2(2.0 * std::numbers::pi * std::numbers::e * sigma * sigma);
  e.difference_entropy = (std::log(z) - slns / mass) / std::numbers::ln2;
  e.joint_entropy = e.sum_entropy + e.difference_entropy - sum_difference_jacobian_bits(2);

  // Marginal m(y) = 4 int g(s) h(|s - 2y|) d^2s with the pump factor g on polar nodes.
  std::vector<double> rn, rw;
  const double rmax = 8.0 * sigma;
  const double dr = rmax / static_cast<double>(res.radial_nodes);
  double wsum = 0.0;
  for (std::size_t j = 0; j < res.radial_nodes; ++j) {
    const double r = (static_cast<double>(j) + 0.5) * dr;
    rn.push_back(r);
    rw.push_back(r * std::exp(-0.5 * r * r / (sigma * sigma)));
    wsum += rw.back();
  }
  for (double& w : rw) w /= wsum * static_cast<double>(res.angle_nodes);
  std::vector<double> cosines(res.angle_nodes);
  for (std::size_t q = 0; q < res.angle_nodes; ++q)
    cosines[q] = std::cos(2.0 * std::numbers::pi * (static_cast<double>(q) + 0.5) / static_cast<double>(res.angle_nodes));
  auto h = [&](double d2) { return detail::sinc2_half((d2 / (4.0 * k) - p.collinear_mismatch_per_mm) * l) / z; };

  // Uniform grid in w = |y|^2 L / K; d^2y = pi (K/L) dw.
  const double dw = res.w_max / static_cast<double>(nw - 1);
  const double measure = std::numbers::pi * k / l;
  double mtot = 0.0, mlnm = 0.0;
  for (std::size_t i = 0; i < nw; ++i) {
    const double y2 = dw * static_cast<double>(i) * k / l;
    double m = 0.0;
    for (std::size_t j = 0; j < rn.size(); ++j) {
      const double r = rn[j];
      double acc = 0.0;
      for (double c : cosines) acc += h(r * r + 4.0 * y2 - 4.0 * r * std::sqrt(y2) * c);
      m += rw[j] * acc;
    }
    m *= 4.0;
    const double wt = ((i == 0 || i + 1 == nw) ? 0.5 : 1.0) * dw * measure;
    mtot += wt * m;
    if (m > 0.0) mlnm += wt * m * std::log(m);
  }
  // Tail beyond w_max: m ~ (4/z) s(w - delta L).
  const double wm = res.w_max;
  const double tail_mass = 2.0 / (wm * mass);
  const double tail_ent = (2.0 * (2.0 * std::log(wm) + 1.0) / wm - std::log(4.0 / z) * 2.0 / wm) / mass;
  mtot += tail_mass;
  if (std::abs(mtot - 1.0) > 1e-3) throw NumericalError("2-D momentum marginal is not normalized; refine the grid");
  const double hm = (-mlnm + tail_ent) / mtot + std::log(mtot);
  e.marginal_entropy = hm / std::numbers::ln2;
  e.mutual_information = 2.0 * e.marginal_entropy - e.joint_entropy;
  return e;
}

/// Full-2-D position entropies.
inline TransverseEntropies position_entropies_2d(const SourceParams& p, const TransverseResolution& res = {}) {
  p.validate();
  const double k = p.wavenumber_per_mm, l = p.crystal_length_mm;
  const auto cs = detail::log_grid(res.c_min, res.c_max, res.per_decade);
  detail::check_budget(cs.size() * res.position_marginal_points, res, "2-D position model");
  std::vector<double> j2(cs.size()), j2ln(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    j2[i] = std::norm(phase_matching_radial_transform(p, cs[i], res));
    j2ln[i] = j2[i] > 0.0 ? j2[i] * std::log(j2[i]) : 0.0;
  }
  // With c = K |P|^2 / L and D = 2P: d^2D = (4 pi L / K) dc.
  const double s = detail::log_trapezoid(cs, j2);
  const double z = 4.0 * std::numbers::pi * l / k * s;
  TransverseEntropies e;
  e.basis = Basis::position;
  const double sigma = p.pump_waist_mm;
  e.sum_entropy = std::log2(2.0 * std::numbers::pi * std::numbers::e * sigma * sigma);
  e.difference_entropy = (std::log(z) - detail::log_trapezoid(cs, j2ln) / s) / std::numbers::ln2;
  e.joint_entropy = e.sum_entropy + e.difference_entropy - sum_difference_jacobian_bits(2);

  // m(y) = 4 int h(D) D dD exp(-(4y^2 + D^2)/(2 sigma^2)) I0(2yD/sigma^2) / sigma^2,
  // with D dD = (2L/K) dc.
  const std::size_t ny = res.position_marginal_points;
  const double ymax = 8.0 * sigma;
  const double dy = ymax / static_cast<double>(ny - 1);
  std::vector<double> dvals(cs.size()), weights(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    dvals[i] = 2.0 * std::sqrt(cs[i] * l / k);
    const double hl = i == 0 ? 0.0 : std::log(cs[i] / cs[i - 1]);
    const double hr = i + 1 == cs.size() ? 0.0 : std::log(cs[i + 1] / cs[i]);
    weights[i] = 0.5 * (hl + hr) * cs[i] * (j2[i] / z) * (2.0 * l / k);
  }
  double mtot = 0.0, mlnm = 0.0;
  for (std::size_t iy = 0; iy < ny; ++iy) {
    const double y = dy * static_cast<double>(iy);
    double m = 0.0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const double d = dvals[i];
      const double zz = 2.0 * y * d / (sigma * sigma);
      m += weights[i] * std::exp(-(2.0 * y - d) * (2.0 * y - d) / (2.0 * sigma * sigma)) * detail::scaled_bessel_i0(zz);
    }
    m *= 4.0 / (sigma * sigma);
    const double wt = ((iy == 0 || iy + 1 == ny) ? 0.5 : 1.0) * dy * 2.0 * std::numbers::pi * y;
    mtot += wt * m;
    if (m > 0.0) mlnm += wt * m * std::log(m);
  }
  if (std::abs(mtot - 1.0) > 1e-3) throw NumericalError("2-D position marginal is not normalized; refine the grid");
  e.marginal_entropy = (-mlnm / mtot + std::log(mtot)) / std::numbers::ln2;
  e.mutual_information = 2.0 * e.marginal_entropy - e.joint_entropy;
  return e;
}

inline FullTransverse entropies_full_transverse(const SourceParams& p, const TransverseResolution& res = {}) {
  return {momentum_entropies_2d(p, res), position_entropies_2d(p, res)};
}

}  // namespace sqkd
