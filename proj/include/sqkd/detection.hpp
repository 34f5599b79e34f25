#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sqkd/amplitude.hpp"
#include "sqkd/error.hpp"
#include "sqkd/factorized.hpp"
#include "sqkd/infotheory.hpp"

namespace sqkd {

struct DetectorArrayParams {
  std::size_t pixels = 128;
  double efficiency = 0.6;
  double dark_count = 1e-6;  ///< per pixel per gate
  double coverage = 0.9995;  ///< marginal probability mass spanned by the array

  void validate() const {
    require(pixels >= 1, "pixel count must be at least 1");
    require(efficiency >= 0.0 && efficiency <= 1.0, "detection efficiency must lie in [0, 1]");
    require(dark_count >= 0.0 && dark_count < 1.0, "dark-count probability must lie in [0, 1)");
    require(coverage > 0.0 && coverage <= 1.0, "array coverage must lie in (0, 1]");
  }
  /// Efficiency including the photons that miss the array.
  double effective_efficiency() const { return efficiency * coverage; }
};

struct ChannelParams {
  double alice_throughput = 1.0;
  double bob_throughput = 1.0;
  double extinction_db_per_km = 1.0;

  void validate() const {
    require(alice_throughput >= 0.0 && alice_throughput <= 1.0, "t_A must lie in [0, 1]");
    require(bob_throughput >= 0.0 && bob_throughput <= 1.0, "t_B must lie in [0, 1]");
    require(extinction_db_per_km > 0.0, "extinction coefficient must be positive");
  }
  double loss() const { return 1.0 - bob_throughput; }
  double loss_db() const { return -10.0 * std::log10(bob_throughput); }
  double distance_km() const { return loss_db() / extinction_db_per_km; }

  static ChannelParams from_loss_db(double db, double alice_throughput = 1.0) {
    ChannelParams c;
    c.alice_throughput = alice_throughput;
    c.bob_throughput = std::pow(10.0, -db / 10.0);
    c.validate();
    return c;
  }
  static ChannelParams from_distance_km(double km, double db_per_km = 1.0, double alice_throughput = 1.0) {
    ChannelParams c = from_loss_db(km * db_per_km, alice_throughput);
    c.extinction_db_per_km = db_per_km;
    return c;
  }
};

/// Per-gate probabilities of the three accepted-event classes:
/// both dark (1), one photon and one dark (2), both photons (3).
struct EventProbabilities {
  double p1 = 0.0;
  double p2_alice_photon = 0.0;  ///< Alice detects the photon, Bob a dark count
  double p2_bob_photon = 0.0;    ///< Bob detects the photon, Alice a dark count
  double p3 = 0.0;

  double p2() const { return p2_alice_photon + p2_bob_photon; }
  double accepted() const { return p1 + p2() + p3; }
  double background_fraction() const { return (p1 + p2()) / accepted(); }
};

inline EventProbabilities event_probabilities(double pair_probability, const ChannelParams& channel,
                                              const DetectorArrayParams& array) {
  channel.validate();
  array.validate();
  require(pair_probability >= 0.0 && pair_probability <= 1.0, "P_PDC must lie in [0, 1]");
  const double n = static_cast<double>(array.pixels);
  const double pd = array.dark_count;
  const double q = 1.0 - pd;
  const double ea = array.effective_efficiency() * channel.alice_throughput;
  const double eb = array.effective_efficiency() * channel.bob_throughput;
  const double pp = pair_probability;
  EventProbabilities e;
  e.p1 = (1.0 - pp + pp * (1.0 - ea) * (1.0 - eb)) * n * n * pd * pd * std::pow(q, 2.0 * n - 2.0);
  const double one_dark = n * pd * std::pow(q, 2.0 * n - 1.0);
  e.p2_alice_photon = pp * ea * (1.0 - eb) * one_dark;
  e.p2_bob_photon = pp * (1.0 - ea) * eb * one_dark;
  e.p3 = pp * ea * eb * std::pow(q, 2.0 * n);
  return e;
}

struct PixelJointDistribution {
  Basis basis = Basis::momentum;
  Eigen::MatrixXd probabilities;  ///< rows: Alice pixel, columns: Bob pixel; sums to 1
  std::vector<double> alice_edges;
  std::vector<double> bob_edges;
  double in_array_mass = 1.0;     ///< continuous mass captured before renormalization
  double signal_weight = 1.0;     ///< share of correlated pair events
  double background_weight = 0.0;

  std::size_t pixels() const { return static_cast<std::size_t>(probabilities.rows()); }
  Eigen::VectorXd alice_marginal() const { return probabilities.rowwise().sum(); }
  Eigen::VectorXd bob_marginal() const { return probabilities.colwise().sum().transpose(); }
};

inline std::vector<double> pixel_edges(double half_width, std::size_t pixels) {
  std::vector<double> e(pixels + 1);
  for (std::size_t i = 0; i <= pixels; ++i)
    e[i] = -half_width + 2.0 * half_width * static_cast<double>(i) / static_cast<double>(pixels);
  return e;
}

inline std::vector<double> pixel_centers(std::span<const double> edges) {
  std::vector<double> c(edges.size() - 1);
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) c[i] = 0.5 * (edges[i] + edges[i + 1]);
  return c;
}

namespace detail {

/// Half-width of the symmetric interval holding `coverage` of a gridded density.
inline double coverage_half_width(const Density1D& m, double coverage) {
  const Grid1D& g = m.grid;
  const double step = g.step();
  auto mass_within = [&](double a) {
    double acc = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double lo = std::max(g[i] - 0.5 * step, -a);
      const double hi = std::min(g[i] + 0.5 * step, a);
      if (hi > lo) acc += m.values(static_cast<Eigen::Index>(i)) * (hi - lo);
    }
    return acc;
  };
  const double limit = std::min(-g.min(), g.max());
  if (mass_within(limit) < coverage * (1.0 - 1e-12))
    throw ParameterError("array coverage " + std::to_string(coverage) +
                         " exceeds the grid extent; use a larger grid or coverage factor");
  double lo = 0.0, hi = limit;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass_within(mid) < coverage ? lo : hi) = mid;
  }
  return hi;
}

/// Fraction of each grid cell falling in each pixel (pixels x grid points).
inline Eigen::MatrixXd overlap_matrix(const Grid1D& g, std::span<const double> edges) {
  const auto np = static_cast<Eigen::Index>(edges.size() - 1);
  Eigen::MatrixXd o = Eigen::MatrixXd::Zero(np, static_cast<Eigen::Index>(g.size()));
  const double step = g.step();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double lo = g[i] - 0.5 * step, hi = g[i] + 0.5 * step;
    for (Eigen::Index p = 0; p < np; ++p) {
      const double a = std::max(lo, edges[static_cast<std::size_t>(p)]);
      const double b = std::min(hi, edges[static_cast<std::size_t>(p) + 1]);
      if (b > a) o(p, static_cast<Eigen::Index>(i)) = b - a;
    }
  }
  return o;
}

inline PixelJointDistribution finish_binning(Basis basis, Eigen::MatrixXd mass, std::vector<double> ea,
                                             std::vector<double> eb) {
  PixelJointDistribution out;
  out.basis = basis;
  out.in_array_mass = mass.sum();
  if (!(out.in_array_mass > 0.0)) throw NumericalError("no probability falls on the detector array");
  mass = mass.cwiseMax(0.0);
  out.probabilities = mass / mass.sum();
  out.alice_edges = std::move(ea);
  out.bob_edges = std::move(eb);
  return out;
}

}  // namespace detail

/// Integrates a gridded joint density over an n x n pixel array spanning the
/// central `coverage` of each marginal. Mass outside the array is dropped
/// (it is accounted for as loss by the effective efficiency).
inline PixelJointDistribution bin_distribution(const JointDistribution& dist, const DetectorArrayParams& array) {
  array.validate();
  detail::check_normalized(dist.total_probability(), "joint density");
  const double ha = detail::coverage_half_width(marginal(dist, Photon::signal), array.coverage);
  const double hb = detail::coverage_half_width(marginal(dist, Photon::idler), array.coverage);
  auto ea = pixel_edges(ha, array.pixels);
  auto eb = pixel_edges(hb, array.pixels);
  const Eigen::MatrixXd oa = detail::overlap_matrix(dist.signal_grid, ea);
  const Eigen::MatrixXd ob = detail::overlap_matrix(dist.idler_grid, eb);
  Eigen::MatrixXd mass = oa * dist.density * ob.transpose();
  return detail::finish_binning(dist.signal_basis, std::move(mass), std::move(ea), std::move(eb));
}

/// Binning of the exact factorized model.
inline PixelJointDistribution bin_distribution(const FactorizedJoint& joint, const DetectorArrayParams& array) {
  array.validate();
  const double half = std::max(-joint.marginal_quantile(0.5 * (1.0 - array.coverage)),
                               joint.marginal_quantile(0.5 * (1.0 + array.coverage)));
  const Grid1D& g = joint.marginal().grid;
  if (array.coverage < 1.0 && half >= std::min(-g.min(), g.max()))
    throw ParameterError("array coverage exceeds the marginal grid extent");
  auto edges = pixel_edges(half, array.pixels);
  Eigen::MatrixXd mass = joint.pixel_probabilities(edges, edges);
  return detail::finish_binning(joint.basis(), std::move(mass), edges, edges);
}

/// Mixture over accepted single-click events: P3 on the signal, the two
/// class-2 terms as (marginal x uniform), P1 on uniform x uniform.
inline PixelJointDistribution noisy_pixel_joint(const PixelJointDistribution& signal, const EventProbabilities& probs) {
  const double total = probs.accepted();
  if (!(total > 0.0)) throw NumericalError("no accepted events: P1 + P2 + P3 = 0");
  const auto n = signal.probabilities.rows();
  const auto m = signal.probabilities.cols();
  const Eigen::VectorXd ua = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::VectorXd ub = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  PixelJointDistribution out = signal;
  out.probabilities = (probs.p3 * signal.probabilities + probs.p2_alice_photon * signal.alice_marginal() * ub.transpose() +
                       probs.p2_bob_photon * ua * signal.bob_marginal().transpose() + probs.p1 * ua * ub.transpose()) /
                      total;
  out.signal_weight = probs.p3 / total;
  out.background_weight = 1.0 - out.signal_weight;
  return out;
}

/// Mean conditional variance of Alice's pixel-center coordinate given Bob's pixel.
inline double pixel_conditional_variance(const PixelJointDistribution& joint) {
  const auto centers = pixel_centers(joint.alice_edges);
  return detail::mean_conditional_variance(joint.probabilities, centers);
}

inline double discrete_mutual_information(const PixelJointDistribution& joint) {
  return discrete_mutual_information(joint.probabilities);
}

struct WitnessScanPoint {
  double throughput = 0.0;
  double loss_db = 0.0;
  double distance_km = 0.0;
  double background_fraction = 0.0;
  WitnessReport witness;
};

struct WitnessScan {
  std::vector<WitnessScanPoint> curve;
  std::optional<double> threshold;  ///< t* where the product first reaches 1/4; empty if never crossed
  bool satisfied_everywhere = false;
};

/// Binned signal distributions of both bases, shared across scan points.
struct BinnedSource {
  PixelJointDistribution momentum;
  PixelJointDistribution position;
};

inline BinnedSource bin_source(const SourceParams& params, const DetectorArrayParams& array,
                               const FactorizedResolution& res = {}) {
  return {bin_distribution(momentum_joint(params, res), array), bin_distribution(position_joint(params, res), array)};
}

inline WitnessScanPoint witness_at(const BinnedSource& src, double pair_probability, const DetectorArrayParams& array,
                                   ChannelParams channel) {
  const EventProbabilities e = event_probabilities(pair_probability, channel, array);
  WitnessScanPoint pt;
  pt.throughput = channel.bob_throughput;
  pt.loss_db = channel.loss_db();
  pt.distance_km = channel.distance_km();
  pt.background_fraction = e.background_fraction();
  pt.witness = make_witness(pixel_conditional_variance(noisy_pixel_joint(src.position, e)),
                            pixel_conditional_variance(noisy_pixel_joint(src.momentum, e)));
  return pt;
}

/// Scans Bob's throughput and bisects the throughput at which the variance
/// product crosses 1/4 (higher throughput means less relative noise).
inline WitnessScan witness_threshold_scan(const BinnedSource& src, double pair_probability,
                                          const DetectorArrayParams& array, std::span<const double> throughputs,
                                          const ChannelParams& base = {}) {
  require(!throughputs.empty(), "throughput range is empty");
  for (std::size_t i = 1; i < throughputs.size(); ++i)
    require(throughputs[i] > throughputs[i - 1], "throughput range must be strictly increasing");
  WitnessScan scan;
  auto at = [&](double t) {
    ChannelParams c = base;
    c.bob_throughput = t;
    return witness_at(src, pair_probability, array, c);
  };
  for (double t : throughputs) scan.curve.push_back(at(t));
  scan.satisfied_everywhere =
      std::all_of(scan.curve.begin(), scan.curve.end(), [](const auto& p) { return p.witness.satisfied; });
  for (std::size_t i = 1; i < scan.curve.size(); ++i) {
    if (scan.curve[i - 1].witness.satisfied || !scan.curve[i].witness.satisfied) continue;
    double lo = scan.curve[i - 1].throughput, hi = scan.curve[i].throughput;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      (at(mid).witness.satisfied ? hi : lo) = mid;
    }
    scan.threshold = 0.5 * (lo + hi);
    break;
  }
  return scan;
}

inline WitnessScan witness_threshold_scan(const SourceParams& params, const DetectorArrayParams& array,
                                          std::span<const double> throughputs, const ChannelParams& base = {},
                                          const FactorizedResolution& res = {}) {
  return witness_threshold_scan(bin_source(params, array, res), params.pair_probability, array, throughputs, base);
}

}  // namespace sqkd
