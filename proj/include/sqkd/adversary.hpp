#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sqkd/detection.hpp"
#include "sqkd/error.hpp"
#include "sqkd/infotheory.hpp"
#include "sqkd/schmidt.hpp"

namespace sqkd {

struct AttackParams {
  double ratio = 0.0;             ///< intercept-resend ratio lambda
  std::size_t eve_pixels = 0;     ///< 0 means "same as Bob"

  void validate() const { require(ratio >= 0.0 && ratio <= 1.0, "intercept-resend ratio must lie in [0, 1]"); }
};

/// Largest intercept-resend ratio Eve can hide behind the dark-count
/// background at channel loss l:
///   min{ 2n / ((1/l - 1)(1/P_dark - 1) + n), 1 },
/// zero for a lossless channel or noiseless detectors.
inline double lambda_max(double loss, const DetectorArrayParams& array) {
  array.validate();
  require(loss >= 0.0 && loss <= 1.0, "channel loss must lie in [0, 1]");
  if (loss == 0.0 || array.dark_count == 0.0) return 0.0;
  const double n = static_cast<double>(array.pixels);
  const double v = 2.0 * n / ((1.0 / loss - 1.0) * (1.0 / array.dark_count - 1.0) + n);
  return std::min(v, 1.0);
}

struct AttackedDistributions {
  PixelJointDistribution alice_bob;
  PixelJointDistribution alice_eve;
};

/// Accepted-event distributions under an intercept-resend attack with ratio
/// lambda. Of the pair events reaching Bob, a share 1 - lambda/2 keeps the
/// signal correlation (untouched or intercepted in the right basis) and
/// lambda/2 becomes (Alice marginal x uniform). Eve learns the signal pixel
/// on the lambda/2 of events she measured in the right basis.
inline AttackedDistributions attacked_pixel_joint(const PixelJointDistribution& signal, const EventProbabilities& probs,
                                                  const AttackParams& attack) {
  attack.validate();
  const double total = probs.accepted();
  if (!(total > 0.0)) throw NumericalError("no accepted events: P1 + P2 + P3 = 0");
  const double lam = attack.ratio;
  const auto n = signal.probabilities.rows();
  const auto m = signal.probabilities.cols();
  const Eigen::VectorXd ua = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  const Eigen::VectorXd ub = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  const Eigen::VectorXd pa = signal.alice_marginal();
  const Eigen::MatrixXd a_times_u = pa * ub.transpose();

  AttackedDistributions out;
  out.alice_bob = signal;
  out.alice_bob.probabilities =
      (probs.p3 * ((1.0 - 0.5 * lam) * signal.probabilities + 0.5 * lam * a_times_u) +
       probs.p2_alice_photon * a_times_u + probs.p2_bob_photon * ua * signal.bob_marginal().transpose() +
       probs.p1 * ua * ub.transpose()) /
      total;
  out.alice_bob.signal_weight = probs.p3 * (1.0 - 0.5 * lam) / total;
  out.alice_bob.background_weight = 1.0 - out.alice_bob.signal_weight;

  // Eve's pixelization equals Bob's.
  out.alice_eve = signal;
  out.alice_eve.probabilities = 0.5 * lam * signal.probabilities + (1.0 - 0.5 * lam) * a_times_u;
  out.alice_eve.signal_weight = 0.5 * lam;
  out.alice_eve.background_weight = 1.0 - 0.5 * lam;
  return out;
}

struct SecurityPoint {
  double loss = 0.0;
  double loss_db = 0.0;
  double lambda_max = 0.0;
  double i_ab_min = 0.0;  ///< bits per accepted event, averaged over the two bases
  double i_ae_max = 0.0;
  double delta_i_min = 0.0;
  double i_ab_momentum = 0.0, i_ab_position = 0.0;
  double i_ae_momentum = 0.0, i_ae_position = 0.0;
};

/// Delta I^min at channel loss l (t_B = 1 - l) with lambda = lambda_max(l),
/// using both bases with equal weight.
inline SecurityPoint delta_i_min(double loss, const BinnedSource& src, double pair_probability,
                                 const DetectorArrayParams& array, double alice_throughput = 1.0) {
  SecurityPoint pt;
  pt.loss = loss;
  pt.loss_db = -10.0 * std::log10(1.0 - loss);
  pt.lambda_max = lambda_max(loss, array);
  ChannelParams ch;
  ch.alice_throughput = alice_throughput;
  ch.bob_throughput = 1.0 - loss;
  const EventProbabilities e = event_probabilities(pair_probability, ch, array);
  const AttackParams attack{pt.lambda_max, array.pixels};
  const auto k = attacked_pixel_joint(src.momentum, e, attack);
  const auto r = attacked_pixel_joint(src.position, e, attack);
  pt.i_ab_momentum = discrete_mutual_information(k.alice_bob);
  pt.i_ab_position = discrete_mutual_information(r.alice_bob);
  pt.i_ae_momentum = discrete_mutual_information(k.alice_eve);
  pt.i_ae_position = discrete_mutual_information(r.alice_eve);
  pt.i_ab_min = 0.5 * (pt.i_ab_momentum + pt.i_ab_position);
  pt.i_ae_max = 0.5 * (pt.i_ae_momentum + pt.i_ae_position);
  pt.delta_i_min = pt.i_ab_min - pt.i_ae_max;
  return pt;
}

inline SecurityPoint delta_i_min(double loss, const SourceParams& params, const DetectorArrayParams& array,
                                 const FactorizedResolution& res = {}) {
  return delta_i_min(loss, bin_source(params, array, res), params.pair_probability, array);
}

struct SecurityCurve {
  std::vector<SecurityPoint> points;
  std::optional<double> crossing_db;      ///< loss at which Delta I^min reaches 0
  std::optional<double> crossing_lambda;  ///< lambda_max at that loss
};

/// Delta I^min over a list of losses in dB, with the zero crossing located by bisection.
inline SecurityCurve security_curve(std::span<const double> losses_db, const BinnedSource& src,
                                    double pair_probability, const DetectorArrayParams& array) {
  require(!losses_db.empty(), "loss range is empty");
  auto loss_of = [](double db) { return 1.0 - std::pow(10.0, -db / 10.0); };
  SecurityCurve c;
  for (double db : losses_db) c.points.push_back(delta_i_min(loss_of(db), src, pair_probability, array));
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    if (c.points[i - 1].delta_i_min > 0.0 && c.points[i].delta_i_min <= 0.0) {
      double lo = losses_db[i - 1], hi = losses_db[i];
      for (int it = 0; it < 50; ++it) {
        const double mid = 0.5 * (lo + hi);
        (delta_i_min(loss_of(mid), src, pair_probability, array).delta_i_min > 0.0 ? lo : hi) = mid;
      }
      c.crossing_db = 0.5 * (lo + hi);
      c.crossing_lambda = lambda_max(loss_of(*c.crossing_db), array);
      break;
    }
  }
  return c;
}

inline SecurityCurve security_curve(std::span<const double> losses_db, const SourceParams& params,
                                    const DetectorArrayParams& array, const FactorizedResolution& res = {}) {
  return security_curve(losses_db, bin_source(params, array, res), params.pair_probability, array);
}

struct NegativityResult {
  double log_negativity = 0.0;  ///< bits
  double discarded_weight = 0.0;
  std::size_t dimension = 0;
};

namespace detail {

/// Adds (weight/2) sum_m rho_A^(m) (x) |b_m><b_m| for a measure-and-resend on
/// Bob's photon in one basis. `alice` and `bob` hold the modes sampled on `grid`.
inline void add_measure_resend(Eigen::MatrixXcd& rho, const Eigen::VectorXd& c, const Eigen::MatrixXcd& bob,
                               const Grid1D& grid, std::span<const double> edges, double weight) {
  const auto d = c.size();
  const Eigen::MatrixXd overlap = detail::overlap_matrix(grid, edges);
  for (Eigen::Index px = 0; px < overlap.rows(); ++px) {
    const double width = edges[static_cast<std::size_t>(px) + 1] - edges[static_cast<std::size_t>(px)];
    // <v_j'|Pi_m|v_j> and <v_l|b_m> from the cell overlaps.
    Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(d, d);
    Eigen::VectorXcd box = Eigen::VectorXcd::Zero(d);
    for (Eigen::Index i = 0; i < overlap.cols(); ++i) {
      const double o = overlap(px, i);
      if (o == 0.0) continue;
      const Eigen::VectorXcd v = bob.row(i).transpose();
      proj.noalias() += o * v.conjugate() * v.transpose();
      box += (o / std::sqrt(width)) * v.conjugate();
    }
    const double bn = box.norm();
    if (bn == 0.0) continue;
    box /= bn;
    // rho_A[j, j'] = c_j c_j' <v_j'|Pi|v_j>
    Eigen::MatrixXcd rho_a(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index jp = 0; jp < d; ++jp) rho_a(j, jp) = c(j) * c(jp) * proj(jp, j);
    const Eigen::MatrixXcd rho_b = box * box.adjoint();
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index jp = 0; jp < d; ++jp) {
        if (rho_a(j, jp) == cdouble(0.0)) continue;
        rho.block(j * d, jp * d, d, d) += weight * rho_a(j, jp) * rho_b;
      }
  }
}

}  // namespace detail

/// Log-negativity (bits) of the post-attack state in the truncated Schmidt basis:
///   (1 - lambda) |psi_D><psi_D| + (lambda/2) MR_momentum + (lambda/2) MR_position,
/// where MR is Eve's pixel measure-and-resend on Bob's photon. The retained
/// coefficients are renormalized; the discarded weight is reported.
inline NegativityResult log_negativity(const ModeSet& modes, double lambda, std::span<const double> momentum_edges,
                                       std::span<const double> position_edges) {
  require(lambda >= 0.0 && lambda <= 1.0, "intercept-resend ratio must lie in [0, 1]");
  const auto d = static_cast<Eigen::Index>(modes.dimension());
  const Eigen::VectorXd c = modes.coefficients / modes.coefficients.norm();
  const auto dim = d * d;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
  for (Eigen::Index j = 0; j < d; ++j) psi(j * d + j) = c(j);
  rho += (1.0 - lambda) * psi * psi.adjoint();
  if (lambda > 0.0) {
    detail::add_measure_resend(rho, c, modes.idler_momentum, modes.momentum_grid, momentum_edges, 0.5 * lambda);
    detail::add_measure_resend(rho, c, modes.idler_position, modes.position_grid, position_edges, 0.5 * lambda);
  }
  const cdouble tr = rho.trace();
  if (!(tr.real() > 0.0)) throw NumericalError("post-attack state has zero trace");
  rho /= tr.real();

  // Partial transpose on Bob: (j l),(j' l') -> (j l'),(j' l).
  Eigen::MatrixXcd pt(dim, dim);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index l = 0; l < d; ++l)
      for (Eigen::Index jp = 0; jp < d; ++jp)
        for (Eigen::Index lp = 0; lp < d; ++lp) pt(j * d + l, jp * d + lp) = rho(j * d + lp, jp * d + l);
  pt = 0.5 * (pt + pt.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(pt, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the partial transpose failed");
  const double trace_norm = es.eigenvalues().cwiseAbs().sum();
  NegativityResult r;
  r.log_negativity = std::max(std::log2(trace_norm), 0.0);
  r.discarded_weight = modes.discarded_weight;
  r.dimension = static_cast<std::size_t>(d);
  return r;
}

/// Pure-state value 2 log2(sum c_i) of the renormalized retained coefficients.
inline double pure_state_log_negativity(const ModeSet& modes) {
  const Eigen::VectorXd c = modes.coefficients / modes.coefficients.norm();
  return 2.0 * std::log2(c.sum());
}

/// Log-negativity of a sampled momentum amplitude, with Eve's pixels spanning
/// the central `array.coverage` of each marginal.
inline NegativityResult log_negativity(const JointAmplitude& amp, const AttackParams& attack,
                                       const DetectorArrayParams& array, std::size_t dim = 16) {
  attack.validate();
  const auto dec = schmidt_decompose(amp, dim);
  const auto modes = mode_set(dec, std::min(dim, dec.coefficients.size()));
  DetectorArrayParams eve = array;
  if (attack.eve_pixels > 0) eve.pixels = attack.eve_pixels;
  const auto k = bin_distribution(to_distribution(amp), eve);
  const auto r = bin_distribution(to_distribution(to_position_basis(amp)), eve);
  return log_negativity(modes, attack.ratio, k.alice_edges, r.alice_edges);
}

}  // namespace sqkd
