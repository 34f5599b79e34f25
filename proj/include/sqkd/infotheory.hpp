#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sqkd/amplitude.hpp"
#include "sqkd/error.hpp"

namespace sqkd {

// All entropies are in bits. Differential entropies of gridded densities
// depend on the grid units (rad/mm or mm); reports say which.

namespace detail {

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

inline void check_normalized(double total, const char* what) {
  if (!(std::abs(total - 1.0) <= 1e-6))
    throw NumericalError(std::string(what) + " is not normalized (total probability " +
                         std::to_string(total) + ")");
}

/// Mass-weighted mean of the row-coordinate variance within each column.
/// `mass(a, b)` may carry any common scale factor.
inline double mean_conditional_variance(const Eigen::MatrixXd& mass, std::span<const double> row_coord) {
  double total = 0.0;
  double acc = 0.0;
  for (Eigen::Index b = 0; b < mass.cols(); ++b) {
    double w = 0.0, m1 = 0.0;
    for (Eigen::Index a = 0; a < mass.rows(); ++a) {
      w += mass(a, b);
      m1 += mass(a, b) * row_coord[static_cast<std::size_t>(a)];
    }
    if (w <= 0.0) continue;
    const double mean = m1 / w;
    double v = 0.0;
    for (Eigen::Index a = 0; a < mass.rows(); ++a) {
      const double dx = row_coord[static_cast<std::size_t>(a)] - mean;
      v += mass(a, b) * dx * dx;
    }
    acc += v;
    total += w;
  }
  if (!(total > 0.0)) throw NumericalError("conditional variance of an empty distribution");
  return acc / total;
}

}  // namespace detail

inline double differential_entropy(const Density1D& density) {
  detail::check_normalized(density.total_probability(), "density");
  double h = 0.0;
  for (Eigen::Index i = 0; i < density.values.size(); ++i) h -= detail::plogp(density.values(i));
  return h * density.grid.step();
}

inline double differential_entropy(const JointDistribution& dist) {
  detail::check_normalized(dist.total_probability(), "joint density");
  double h = 0.0;
  for (Eigen::Index c = 0; c < dist.density.cols(); ++c)
    for (Eigen::Index r = 0; r < dist.density.rows(); ++r) h -= detail::plogp(dist.density(r, c));
  return h * dist.cell();
}

/// H(target | other) = H(joint) - H(other).
inline double conditional_entropy(const JointDistribution& dist, Photon target) {
  return differential_entropy(dist) - differential_entropy(marginal(dist, partner(target)));
}

/// I = H(idler) - H(idler | signal), cross-checked against the direct
/// sum p log(p / (p_s p_i)) ds di.
inline double mutual_information(const JointDistribution& dist) {
  const Density1D ms = marginal(dist, Photon::signal);
  const Density1D mi = marginal(dist, Photon::idler);
  const double via_entropies = differential_entropy(mi) - conditional_entropy(dist, Photon::idler);

  double direct = 0.0;
  for (Eigen::Index c = 0; c < dist.density.cols(); ++c)
    for (Eigen::Index r = 0; r < dist.density.rows(); ++r) {
      const double p = dist.density(r, c);
      if (p > 0.0) direct += p * std::log2(p / (ms.values(r) * mi.values(c)));
    }
  direct *= dist.cell();
  if (std::abs(direct - via_entropies) > 1e-6)
    throw NumericalError("mutual information routes disagree: " + std::to_string(direct) + " vs " +
                         std::to_string(via_entropies));
  return direct;
}

/// Mean conditional variance Delta^2(target | other) = sum_other p(other) Var(target | other),
/// in squared grid units.
inline double conditional_variance(const JointDistribution& dist, Photon target) {
  detail::check_normalized(dist.total_probability(), "joint density");
  if (target == Photon::signal)
    return detail::mean_conditional_variance(dist.density, dist.signal_grid.values());
  const Eigen::MatrixXd t = dist.density.transpose();
  return detail::mean_conditional_variance(t, dist.idler_grid.values());
}

/// EPR witness: Delta^2(r_A|r_B) * Delta^2(k_A|k_B) <= 1/4.
/// Alice holds the signal photon, Bob the idler. The conditional variance is
/// the B-averaged variance (not a minimized linear estimator).
struct WitnessReport {
  double position_variance = 0.0;  ///< mm^2
  double momentum_variance = 0.0;  ///< rad^2/mm^2
  double product = 0.0;
  bool satisfied = false;
};

inline WitnessReport make_witness(double position_variance, double momentum_variance) {
  WitnessReport w;
  w.position_variance = position_variance;
  w.momentum_variance = momentum_variance;
  w.product = position_variance * momentum_variance;
  w.satisfied = w.product <= 0.25;
  return w;
}

inline WitnessReport epr_witness(const JointDistribution& dist_k, const JointDistribution& dist_r) {
  return make_witness(conditional_variance(dist_r, Photon::signal),
                      conditional_variance(dist_k, Photon::signal));
}

/// Both lines of the key-rate lower bound, in bits.
struct KeyRateBound {
  double entropic = 0.0;        ///< log2(pi e) - H(r_A|r_B) - H(k_A|k_B)
  double variance_based = 0.0;  ///< 0.5 log2(1 / (4 Delta^2_r Delta^2_k))
};

inline KeyRateBound make_keyrate_bound(double h_r, double h_k, double var_r, double var_k) {
  KeyRateBound b;
  b.entropic = std::log2(std::numbers::pi * std::numbers::e) - h_r - h_k;
  b.variance_based = 0.5 * std::log2(1.0 / (4.0 * var_r * var_k));
  if (b.entropic < b.variance_based - 1e-6)
    throw NumericalError("entropic key-rate bound fell below its variance relaxation");
  return b;
}

inline KeyRateBound keyrate_lower_bound(const JointDistribution& dist_k, const JointDistribution& dist_r) {
  return make_keyrate_bound(conditional_entropy(dist_r, Photon::signal),
                            conditional_entropy(dist_k, Photon::signal),
                            conditional_variance(dist_r, Photon::signal),
                            conditional_variance(dist_k, Photon::signal));
}

/// I_AB, I_AE and Delta I = I_AB - I_AE with the entropic lower bound.
struct KeyRateReport {
  double i_ab = 0.0;
  double i_ae = 0.0;
  double delta_i = 0.0;
  KeyRateBound bound;
};

inline KeyRateReport make_key_rate_report(double i_ab, double i_ae, const KeyRateBound& bound) {
  require(i_ab >= -1e-12 && i_ae >= -1e-12, "mutual informations must be non-negative");
  return {i_ab, i_ae, i_ab - i_ae, bound};
}

/// Discrete mutual information of a joint probability table, 0 log 0 = 0.
inline double discrete_mutual_information(const Eigen::MatrixXd& joint) {
  require((joint.array() >= 0.0).all(), "joint probabilities must be non-negative");
  detail::check_normalized(joint.sum(), "joint probability table");
  const Eigen::VectorXd pa = joint.rowwise().sum();
  const Eigen::VectorXd pb = joint.colwise().sum().transpose();
  double mi = 0.0;
  for (Eigen::Index b = 0; b < joint.cols(); ++b)
    for (Eigen::Index a = 0; a < joint.rows(); ++a) {
      const double p = joint(a, b);
      if (p > 0.0) mi += p * std::log2(p / (pa(a) * pb(b)));
    }
  return std::max(mi, 0.0);
}

}  // namespace sqkd
