#pragma once

// Exact one-dimensional biphoton model in sum/difference coordinates.
//
// The amplitude factorizes as f = alpha(k_s + k_i) * phi_L(k_s - k_i), so
// with s = x + y and d = x - y independent,
//
//     p(x, y) = 2 g(x + y) h(x - y),
//
// in both bases: in momentum g = |alpha|^2 (std 1/w0) and h = |phi_L|^2; in
// position g is the pump intensity profile of r_s + r_i (std w0) and h is
// |FT phi_L|^2 evaluated at (r_s - r_i)/2. One of g, h is always narrow
// compared with the other, which is what makes the realistic source (Schmidt
// number ~1e4) tractable: every joint integral reduces to a quadrature over
// the narrow factor with the wide factor evaluated exactly.

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sqkd/amplitude.hpp"
#include "sqkd/fourier.hpp"
#include "sqkd/infotheory.hpp"
#include "sqkd/profile.hpp"
#include "sqkd/source.hpp"

namespace sqkd {

struct FactorizedResolution {
  std::size_t phase_matching_points = std::size_t{1} << 17;
  double phase_matching_extent = 80.0;  ///< table half-extent in units of sqrt(8K/L)
  std::size_t gaussian_points = 512;
  std::size_t momentum_marginal_points = std::size_t{1} << 15;
  std::size_t position_marginal_points = std::size_t{1} << 12;
  double node_tail = 1e-7;  ///< mass of the narrow factor left out of quadratures

  /// Every sampling density doubled and the phase-matching table twice as wide.
  FactorizedResolution refined() const {
    FactorizedResolution r = *this;
    r.phase_matching_points *= 4;
    r.phase_matching_extent *= 2.0;
    r.gaussian_points *= 2;
    r.momentum_marginal_points *= 2;
    r.position_marginal_points *= 2;
    return r;
  }
};

enum class Coordinate { sum, difference };

class FactorizedJoint {
 public:
  FactorizedJoint(Basis basis, Profile1D sum, Profile1D difference, std::size_t marginal_points,
                  double node_tail)
      : basis_(basis), sum_(std::move(sum)), difference_(std::move(difference)) {
    narrow_ = sum_.half_width(0.5) <= difference_.half_width(0.5) ? Coordinate::sum : Coordinate::difference;
    nodes_ = narrow().nodes(node_tail);
    const double half = 0.5 * (wide().half_width(1e-9) + narrow().half_width(1e-9));
    build_marginal(Grid1D::symmetric(marginal_points, half));
    // Second moment of the narrow factor beyond the quadrature nodes.
    double inside = 0.0;
    for (const auto& n : nodes_) inside += n.weight * n.x * n.x;
    const Profile1D& n = narrow();
    conditional_variance_ += std::max(n.variance() + n.mean() * n.mean() - inside, 0.0);
  }

  Basis basis() const { return basis_; }
  const Profile1D& sum() const { return sum_; }
  const Profile1D& difference() const { return difference_; }
  Coordinate narrow_coordinate() const { return narrow_; }
  const Profile1D& narrow() const { return narrow_ == Coordinate::sum ? sum_ : difference_; }
  const Profile1D& wide() const { return narrow_ == Coordinate::sum ? difference_ : sum_; }

  double pdf(double x, double y) const { return 2.0 * sum_.pdf(x + y) * difference_.pdf(x - y); }

  /// Marginal density of either photon (the two coincide by exchange symmetry).
  const Density1D& marginal() const { return marginal_; }
  double marginal_cdf(double y) const {
    const Grid1D& g = marginal_.grid;
    const double t = (y - g.min()) / g.step();
    if (t <= 0.0) return 0.0;
    if (t >= static_cast<double>(g.size() - 1)) return 1.0;
    const auto i = static_cast<std::size_t>(t);
    const double f = t - static_cast<double>(i);
    return marginal_cdf_[i] + f * (marginal_cdf_[i + 1] - marginal_cdf_[i]);
  }
  double marginal_quantile(double prob) const {
    const auto it = std::lower_bound(marginal_cdf_.begin(), marginal_cdf_.end(), prob);
    const Grid1D& g = marginal_.grid;
    if (it == marginal_cdf_.begin()) return g.min();
    if (it == marginal_cdf_.end()) return g.max();
    const std::size_t i = static_cast<std::size_t>(it - marginal_cdf_.begin());
    const double c0 = marginal_cdf_[i - 1], c1 = marginal_cdf_[i];
    return g[i - 1] + (c1 > c0 ? (prob - c0) / (c1 - c0) : 0.0) * g.step();
  }

  /// H(x, y) = H(s) + H(d) - 1 bit (log2 |det| of (x,y) -> (x+y, x-y)).
  double joint_entropy() const { return sum_.entropy_bits() + difference_.entropy_bits() - 1.0; }
  double marginal_entropy() const { return differential_entropy(marginal_); }
  double conditional_entropy() const { return joint_entropy() - marginal_entropy(); }
  double mutual_information() const { return 2.0 * marginal_entropy() - joint_entropy(); }

  /// Mean conditional variance of one photon given the other (squared basis units).
  double conditional_variance() const { return conditional_variance_; }

  /// Pearson correlation of (x, y) from the factor variances.
  double correlation() const {
    const double vs = sum_.variance(), vd = difference_.variance();
    return (vs - vd) / (vs + vd);
  }

  /// Integrates the joint density over every (alice pixel, bob pixel) box.
  /// Rows index Alice's (signal) pixels, columns Bob's (idler) pixels.
  Eigen::MatrixXd pixel_probabilities(std::span<const double> alice_edges, std::span<const double> bob_edges) const {
    const auto na = static_cast<Eigen::Index>(alice_edges.size() - 1);
    const auto nb = static_cast<Eigen::Index>(bob_edges.size() - 1);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(na, nb);
    const double sigma = sign();
    const Profile1D& w = wide();
    for (const auto& node : nodes_) {
      const double v = node.x;
      for (Eigen::Index b = 0; b < nb; ++b) {
        const double ylo = bob_edges[static_cast<std::size_t>(b)];
        const double yhi = bob_edges[static_cast<std::size_t>(b) + 1];
        // x = v + sigma*y sweeps [xa, xb] as y crosses Bob's pixel.
        const double xa = std::min(v + sigma * ylo, v + sigma * yhi);
        const double xb = std::max(v + sigma * ylo, v + sigma * yhi);
        auto first = std::upper_bound(alice_edges.begin(), alice_edges.end(), xa);
        Eigen::Index a = static_cast<Eigen::Index>(first - alice_edges.begin()) - 1;
        for (a = std::max<Eigen::Index>(a, 0); a < na; ++a) {
          const double lo = std::max(xa, alice_edges[static_cast<std::size_t>(a)]);
          const double hi = std::min(xb, alice_edges[static_cast<std::size_t>(a) + 1]);
          if (lo >= xb) break;
          if (hi <= lo) continue;
          // y interval mapped to the wide coordinate z = v + 2 sigma y = 2x - v.
          const double z1 = 2.0 * lo - v;
          const double z2 = 2.0 * hi - v;
          out(a, b) += node.weight * (w.cdf(std::max(z1, z2)) - w.cdf(std::min(z1, z2)));
        }
      }
    }
    return out;
  }

 private:
  // x = v + sign * y, with v the narrow coordinate.
  double sign() const { return narrow_ == Coordinate::sum ? -1.0 : 1.0; }

  void build_marginal(const Grid1D& grid) {
    const double sigma = sign();
    const Profile1D& w = wide();
    marginal_.grid = grid;
    marginal_.values.resize(static_cast<Eigen::Index>(grid.size()));
    double weighted_var = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double y = grid[i];
      double m0 = 0.0, m1 = 0.0, m2 = 0.0;
      for (const auto& node : nodes_) {
        const double wt = node.weight * w.pdf(node.x + 2.0 * sigma * y);
        m0 += wt;
        m1 += wt * node.x;
        m2 += wt * node.x * node.x;
      }
      marginal_.values(static_cast<Eigen::Index>(i)) = 2.0 * m0;
      if (m0 > 0.0) {
        const double mean = m1 / m0;
        weighted_var += 2.0 * m0 * std::max(m2 / m0 - mean * mean, 0.0);
      }
    }
    const double total = marginal_.values.sum() * grid.step();
    if (!(total > 0.0)) throw NumericalError("factorized marginal has no mass on its grid");
    marginal_.values /= total;
    conditional_variance_ = weighted_var * grid.step() / total;

    marginal_cdf_.resize(grid.size());
    double acc = 0.0;
    marginal_cdf_[0] = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
      acc += 0.5 * (marginal_.values(static_cast<Eigen::Index>(i - 1)) + marginal_.values(static_cast<Eigen::Index>(i))) *
             grid.step();
      marginal_cdf_[i] = acc;
    }
    for (double& c : marginal_cdf_) c /= acc;
  }

  Basis basis_;
  Profile1D sum_;
  Profile1D difference_;
  Coordinate narrow_ = Coordinate::sum;
  std::vector<Profile1D::Node> nodes_;
  Density1D marginal_;
  std::vector<double> marginal_cdf_;
  double conditional_variance_ = 0.0;
};

namespace detail {

/// Half-extent of the phase-matching table (rad/mm), past the main lobe.
inline double phase_matching_table_extent(const SourceParams& p, const FactorizedResolution& res) {
  const double q0 = std::sqrt(8.0 * p.wavenumber_per_mm / p.crystal_length_mm);
  return res.phase_matching_extent * q0 + std::sqrt(4.0 * p.wavenumber_per_mm * std::max(p.collinear_mismatch_per_mm, 0.0));
}

}  // namespace detail

/// |phi_L(q)|^2 as a normalized density of q = k_s - k_i, with the
/// asymptotic 32 K^2 / (L^2 q^4) tail added beyond the table.
inline Profile1D phase_matching_profile(const SourceParams& p, const FactorizedResolution& res = {}) {
  p.validate();
  const double extent = detail::phase_matching_table_extent(p, res);
  const Grid1D grid = Grid1D::symmetric(res.phase_matching_points, extent);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) values[i] = phase_matching_intensity(p, grid[i]);
  const double k = p.wavenumber_per_mm, l = p.crystal_length_mm;
  const double tail_mass = 32.0 * k * k / (3.0 * l * l * extent * extent * extent);
  const double tail_m2 = 64.0 * k * k / (l * l * extent);
  return Profile1D::tabulated(grid.min(), grid.step(), std::move(values), tail_mass, tail_m2,
                              [p](double q) { return phase_matching_intensity(p, q); });
}

/// |FT phi_L|^2 as a normalized density of r_s - r_i (mm), obtained by a
/// unitary FFT of the complex phase-matching function. The part of phi_L
/// beyond the table (|phi'|^2 ~ 4/q^2) enters as tail mass and second moment.
inline Profile1D position_difference_profile(const SourceParams& p, const FactorizedResolution& res = {}) {
  p.validate();
  const double extent = detail::phase_matching_table_extent(p, res);
  const Grid1D qgrid = Grid1D::symmetric(res.phase_matching_points, extent);
  std::vector<cdouble> phi(qgrid.size());
  for (std::size_t i = 0; i < qgrid.size(); ++i) phi[i] = phase_matching(p, qgrid[i]);
  const CenteredDft dft(qgrid);
  const auto transformed = dft(phi);
  std::vector<double> values(transformed.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::norm(transformed[i]);
  // r_s - r_i = 2 P for the conjugate variable P of q.
  const Grid1D& pgrid = dft.output_grid();
  const double k = p.wavenumber_per_mm, l = p.crystal_length_mm;
  const double tail_mass = 64.0 * k * k / (3.0 * l * l * extent * extent * extent);
  const double tail_m2 = 64.0 / extent;
  return Profile1D::tabulated(2.0 * pgrid.min(), 2.0 * pgrid.step(), std::move(values), tail_mass, tail_m2);
}

inline FactorizedJoint momentum_joint(const SourceParams& p, const FactorizedResolution& res = {}) {
  return FactorizedJoint(Basis::momentum, Profile1D::gaussian(pump_width(p), res.gaussian_points),
                         phase_matching_profile(p, res), res.momentum_marginal_points, res.node_tail);
}

inline FactorizedJoint position_joint(const SourceParams& p, const FactorizedResolution& res = {}) {
  return FactorizedJoint(Basis::position, Profile1D::gaussian(p.pump_waist_mm, res.gaussian_points),
                         position_difference_profile(p, res), res.position_marginal_points, res.node_tail);
}

inline double mutual_information(const FactorizedJoint& j) { return j.mutual_information(); }
inline double conditional_variance(const FactorizedJoint& j, Photon) { return j.conditional_variance(); }
inline double conditional_entropy(const FactorizedJoint& j, Photon) { return j.conditional_entropy(); }

inline WitnessReport epr_witness(const FactorizedJoint& k, const FactorizedJoint& r) {
  require(k.basis() == Basis::momentum && r.basis() == Basis::position, "witness needs (momentum, position)");
  return make_witness(r.conditional_variance(), k.conditional_variance());
}

inline KeyRateBound keyrate_lower_bound(const FactorizedJoint& k, const FactorizedJoint& r) {
  require(k.basis() == Basis::momentum && r.basis() == Basis::position, "bound needs (momentum, position)");
  return make_keyrate_bound(r.conditional_entropy(), k.conditional_entropy(), r.conditional_variance(),
                            k.conditional_variance());
}

struct CrossBasisResolution {
  std::size_t momentum_points = 1024;
  std::size_t position_points = 256;
  std::size_t pump_nodes = 128;
  double momentum_tail = 1e-4;  ///< marginal mass left outside the momentum window
};

/// Joint density of (k_s, r_i): |int alpha(u) phi_L(2 k_s - u) exp(i u r_i) du|^2
/// on a momentum x position grid, evaluated with a trapezoid rule over the
/// pump envelope.
inline JointDistribution cross_basis_distribution(const SourceParams& p, const CrossBasisResolution& res = {}) {
  p.validate();
  const Profile1D pm = phase_matching_profile(p);
  const double kmax = 0.5 * pm.half_width(res.momentum_tail) + 6.0 * pump_width(p);
  const double rmax = 0.5 * 8.0 * p.pump_waist_mm;
  const Grid1D kgrid = Grid1D::symmetric(res.momentum_points, kmax);
  const Grid1D rgrid = Grid1D::symmetric(res.position_points, rmax);

  // alpha(u) = exp(-w0^2 u^2 / 4): amplitude std sqrt(2)/w0.
  const double ustd = std::sqrt(2.0) / p.pump_waist_mm;
  const std::size_t nu = res.pump_nodes;
  const double umax = 10.0 * ustd;
  const double du = 2.0 * umax / static_cast<double>(nu - 1);

  Eigen::MatrixXcd phi(static_cast<Eigen::Index>(kgrid.size()), static_cast<Eigen::Index>(nu));
  Eigen::MatrixXcd phase(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(rgrid.size()));
  for (std::size_t j = 0; j < nu; ++j) {
    const double u = -umax + du * static_cast<double>(j);
    const double a = pump_envelope(p, u) * du;
    for (std::size_t i = 0; i < kgrid.size(); ++i)
      phi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a * phase_matching(p, 2.0 * kgrid[i] - u);
    for (std::size_t m = 0; m < rgrid.size(); ++m)
      phase(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) = std::polar(1.0, u * rgrid[m]);
  }
  JointDistribution d;
  d.signal_basis = Basis::momentum;
  d.idler_basis = Basis::position;
  d.signal_grid = kgrid;
  d.idler_grid = rgrid;
  d.density = (phi * phase).cwiseAbs2();
  d.density /= d.density.sum() * d.cell();
  return d;
}

/// I(k_s; r_i) for the realistic source. By exchange symmetry it equals I(r_s; k_i).
inline double cross_basis_mi(const SourceParams& p, const CrossBasisResolution& res = {}) {
  return mutual_information(cross_basis_distribution(p, res));
}

/// I(k_s; r_i) for an arbitrary sampled momentum amplitude.
inline double cross_basis_mi(const JointAmplitude& amp) {
  return mutual_information(to_distribution(idler_to_position(amp)));
}

struct SourceInformation {
  double momentum_mi = 0.0;   ///< I(k_s; k_i), bits
  double position_mi = 0.0;   ///< I(r_s; r_i), bits
  double symmetric_mi = 0.0;  ///< average of the two (equal-probability basis choice)
  double cross_mi = 0.0;      ///< I(k_s; r_i) = I(r_s; k_i)
};

inline SourceInformation source_information(const SourceParams& p, const FactorizedResolution& res = {},
                                            const CrossBasisResolution& cross = {}) {
  SourceInformation info;
  info.momentum_mi = momentum_joint(p, res).mutual_information();
  info.position_mi = position_joint(p, res).mutual_information();
  info.symmetric_mi = 0.5 * (info.momentum_mi + info.position_mi);
  info.cross_mi = cross_basis_mi(p, cross);
  return info;
}

}  // namespace sqkd
