#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Dense>

#include "sqkd/adversary.hpp"
#include "sqkd/detection.hpp"
#include "sqkd/error.hpp"
#include "sqkd/infotheory.hpp"
#include "sqkd/parallel.hpp"

namespace sqkd {

inline constexpr const char* rng_algorithm = "mt19937_64 per batch, seeded by seed_seq(seed, batch index)";

struct SimConfig {
  std::uint64_t pulses = 10'000'000;
  std::uint64_t seed = 1;
  std::uint64_t batch_size = std::uint64_t{1} << 16;
  std::size_t workers = 1;
  SourceParams source = default_source();
  ChannelParams channel;
  DetectorArrayParams array;
  AttackParams attack;

  void validate() const {
    require(pulses >= 1, "pulse count must be at least 1");
    require(batch_size >= 1, "batch size must be at least 1");
    source.validate();
    channel.validate();
    array.validate();
    attack.validate();
  }
};

/// Per-gate outcome. Gates without any click are not emitted.
struct EventRecord {
  static constexpr int no_click = -1;
  static constexpr int multi_click = -2;

  std::uint64_t gate = 0;
  Basis alice_basis = Basis::momentum;
  Basis bob_basis = Basis::momentum;
  int alice_pixel = no_click;
  int bob_pixel = no_click;
  bool alice_photon = false;  ///< Alice's click (if any) is her photon
  bool bob_photon = false;
  bool eve_intercepted = false;
  Basis eve_basis = Basis::momentum;
  int eve_pixel = no_click;
  bool accepted = false;
  int event_class = 0;  ///< 1, 2, 3 for accepted events, 0 otherwise
  bool correlated = false;  ///< Bob's pixel carries the pair correlation with Alice's

  bool same_basis() const { return alice_basis == bob_basis; }
};

namespace detail {

/// Cumulative table over a pixel joint for inverse-transform sampling.
struct PixelSampler {
  std::size_t n = 0;
  std::vector<double> joint_cdf;
  std::vector<double> alice_cdf;
  std::vector<double> bob_cdf;

  explicit PixelSampler(const PixelJointDistribution& d) : n(d.pixels()) {
    const Eigen::MatrixXd& p = d.probabilities;
    joint_cdf.reserve(n * n);
    double acc = 0.0;
    for (Eigen::Index a = 0; a < p.rows(); ++a)
      for (Eigen::Index b = 0; b < p.cols(); ++b) joint_cdf.push_back(acc += p(a, b));
    alice_cdf = cumulative(d.alice_marginal());
    bob_cdf = cumulative(d.bob_marginal());
  }

  static std::vector<double> cumulative(const Eigen::VectorXd& v) {
    std::vector<double> c(static_cast<std::size_t>(v.size()));
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) c[static_cast<std::size_t>(i)] = acc += v(i);
    return c;
  }
  static int draw(const std::vector<double>& cdf, double u) {
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
  }
  std::pair<int, int> joint(double u) const {
    const int k = draw(joint_cdf, u);
    return {k / static_cast<int>(n), k % static_cast<int>(n)};
  }
};

struct SimTables {
  PixelSampler momentum;
  PixelSampler position;
  const PixelSampler& of(Basis b) const { return b == Basis::momentum ? momentum : position; }
};

inline void simulate_batch(const SimConfig& cfg, const SimTables& tables, std::uint64_t batch,
                           std::vector<EventRecord>& out) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(batch), static_cast<std::uint32_t>(batch >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int n = static_cast<int>(cfg.array.pixels);
  std::binomial_distribution<int> darks(n, cfg.array.dark_count);
  std::uniform_int_distribution<int> pixel(0, n - 1);
  const double eta = cfg.array.effective_efficiency();
  const double ta = eta * cfg.channel.alice_throughput;
  const double tb = eta * cfg.channel.bob_throughput;
  const double pdc = cfg.source.pair_probability;
  const double lam = cfg.attack.ratio;

  const std::uint64_t first = batch * cfg.batch_size;
  const std::uint64_t last = std::min(cfg.pulses, first + cfg.batch_size);
  auto basis = [&] { return uni(rng) < 0.5 ? Basis::momentum : Basis::position; };
  for (std::uint64_t g = first; g < last; ++g) {
    EventRecord e;
    e.gate = g;
    e.alice_basis = basis();
    e.bob_basis = basis();
    int a_photon = EventRecord::no_click, b_photon = EventRecord::no_click;
    bool b_correlated = false;
    if (uni(rng) < pdc) {
      const auto& ta_tab = tables.of(e.alice_basis);
      // Pixel Alice's photon would hit, and the partner pixel in Bob's (or Eve's) basis.
      auto pair_pixels = [&](Basis partner) {
        if (partner == e.alice_basis) return ta_tab.joint(uni(rng));
        const int a = PixelSampler::draw(ta_tab.alice_cdf, uni(rng));
        const int b = PixelSampler::draw(tables.of(partner).bob_cdf, uni(rng));
        return std::pair{a, b};
      };
      int a_px = 0, b_px = 0;
      if (lam > 0.0 && uni(rng) < lam) {
        e.eve_intercepted = true;
        e.eve_basis = basis();
        const auto [a, ev] = pair_pixels(e.eve_basis);
        a_px = a;
        e.eve_pixel = ev;
        if (e.bob_basis == e.eve_basis) {
          b_px = ev;
          b_correlated = e.eve_basis == e.alice_basis;
        } else {
          b_px = pixel(rng);
        }
      } else {
        const auto [a, b] = pair_pixels(e.bob_basis);
        a_px = a;
        b_px = b;
        b_correlated = e.bob_basis == e.alice_basis;
      }
      if (uni(rng) < ta) a_photon = a_px;
      if (uni(rng) < tb) b_photon = b_px;
    }
    const int a_darks = cfg.array.dark_count > 0.0 ? darks(rng) : 0;
    const int b_darks = cfg.array.dark_count > 0.0 ? darks(rng) : 0;
    const int a_clicks = a_darks + (a_photon >= 0 ? 1 : 0);
    const int b_clicks = b_darks + (b_photon >= 0 ? 1 : 0);
    if (a_clicks == 0 && b_clicks == 0) continue;

    auto resolve = [&](int clicks, int photon) {
      if (clicks == 0) return EventRecord::no_click;
      if (clicks > 1) return EventRecord::multi_click;
      return photon >= 0 ? photon : pixel(rng);
    };
    e.alice_pixel = resolve(a_clicks, a_photon);
    e.bob_pixel = resolve(b_clicks, b_photon);
    e.alice_photon = a_clicks == 1 && a_photon >= 0;
    e.bob_photon = b_clicks == 1 && b_photon >= 0;
    e.accepted = a_clicks == 1 && b_clicks == 1;
    if (e.accepted) {
      e.event_class = 1 + (e.alice_photon ? 1 : 0) + (e.bob_photon ? 1 : 0);
      e.correlated = e.event_class == 3 && b_correlated;
    }
    out.push_back(e);
  }
}

}  // namespace detail

/// Runs the protocol gate by gate and hands every emitted record to `sink`
/// in gate order. Output depends only on (seed, batch size, physics), not on
/// the worker count.
inline void simulate_pulses(const SimConfig& cfg, const std::function<void(const EventRecord&)>& sink) {
  cfg.validate();
  const BinnedSource src = bin_source(cfg.source, cfg.array);
  const detail::SimTables tables{detail::PixelSampler(src.momentum), detail::PixelSampler(src.position)};
  const std::uint64_t batches = (cfg.pulses + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t workers = std::max<std::size_t>(1, cfg.workers);
  // Batches are processed in windows so memory stays bounded for long runs.
  const std::uint64_t window = 4 * workers;
  std::vector<std::vector<EventRecord>> results;
  for (std::uint64_t start = 0; start < batches; start += window) {
    const std::uint64_t count = std::min(window, batches - start);
    results.assign(count, {});
    parallel_for(count, workers, [&](std::size_t i) { detail::simulate_batch(cfg, tables, start + i, results[i]); });
    for (const auto& batch : results)
      for (const auto& e : batch) sink(e);
  }
}

inline std::vector<EventRecord> simulate_pulses(const SimConfig& cfg) {
  std::vector<EventRecord> events;
  simulate_pulses(cfg, [&](const EventRecord& e) { events.push_back(e); });
  return events;
}

struct SiftedPair {
  int alice = 0;
  int bob = 0;
  int event_class = 0;
  bool correlated = false;
};

struct SiftedPairs {
  std::uint64_t gates = 0;
  std::uint64_t accepted = 0;
  std::uint64_t class_counts[4] = {0, 0, 0, 0};  ///< index 1..3; [0] counts rejected multi-click gates
  std::uint64_t dropped = 0;                      ///< accepted events with different bases
  std::vector<SiftedPair> momentum;
  std::vector<SiftedPair> position;

  const std::vector<SiftedPair>& of(Basis b) const { return b == Basis::momentum ? momentum : position; }
  std::uint64_t sifted() const { return momentum.size() + position.size(); }
};

/// Keeps accepted events whose announced bases agree.
inline SiftedPairs sift(std::span<const EventRecord> events, std::uint64_t gates) {
  SiftedPairs s;
  s.gates = gates;
  for (const auto& e : events) {
    if (!e.accepted) {
      if (e.alice_pixel == EventRecord::multi_click || e.bob_pixel == EventRecord::multi_click) ++s.class_counts[0];
      continue;
    }
    ++s.accepted;
    ++s.class_counts[e.event_class];
    if (!e.same_basis()) {
      ++s.dropped;
      continue;
    }
    (e.alice_basis == Basis::momentum ? s.momentum : s.position)
        .push_back({e.alice_pixel, e.bob_pixel, e.event_class, e.correlated});
  }
  return s;
}

struct Estimate {
  double value = 0.0;
  double standard_error = 0.0;
};

struct BasisStatistics {
  std::uint64_t pairs = 0;
  double mi_plugin = 0.0;        ///< bits
  double mi_miller_madow = 0.0;  ///< plug-in minus (K_AB - K_A - K_B + 1) / (2 N ln 2)
  double conditional_variance = 0.0;
  double pair_conditional_variance = 0.0;  ///< class-3 events only
  Eigen::MatrixXd counts;
};

struct EmpiricalStatistics {
  Estimate p1, p2, p3;
  Estimate sifted_fraction;
  Estimate background_fraction;  ///< uncorrelated share of sifted events
  BasisStatistics momentum;
  BasisStatistics position;
};

inline Eigen::MatrixXd pair_counts(std::span<const SiftedPair> pairs, std::size_t pixels) {
  const auto n = static_cast<Eigen::Index>(pixels);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : pairs) c(p.alice, p.bob) += 1.0;
  return c;
}

inline BasisStatistics basis_statistics(std::span<const SiftedPair> pairs, std::span<const double> alice_edges) {
  BasisStatistics s;
  const std::size_t n = alice_edges.size() - 1;
  s.pairs = pairs.size();
  s.counts = pair_counts(pairs, n);
  if (pairs.empty()) return s;
  const double total = s.counts.sum();
  const Eigen::MatrixXd p = s.counts / total;
  s.mi_plugin = discrete_mutual_information(p);
  const auto nonzero = [](const auto& x) { return static_cast<double>((x.array() > 0.0).count()); };
  const double kab = nonzero(s.counts);
  const double ka = nonzero(Eigen::VectorXd(s.counts.rowwise().sum()));
  const double kb = nonzero(Eigen::VectorXd(s.counts.colwise().sum().transpose()));
  s.mi_miller_madow = s.mi_plugin - (kab - ka - kb + 1.0) / (2.0 * total * std::log(2.0));
  const auto centers = pixel_centers(alice_edges);
  s.conditional_variance = detail::mean_conditional_variance(p, centers);
  std::vector<SiftedPair> pair_events;
  for (const auto& q : pairs)
    if (q.event_class == 3) pair_events.push_back(q);
  if (!pair_events.empty()) {
    const Eigen::MatrixXd c3 = pair_counts(pair_events, n);
    s.pair_conditional_variance = detail::mean_conditional_variance(c3 / c3.sum(), centers);
  }
  return s;
}

inline Estimate binomial_estimate(double k, double n) {
  if (n <= 0.0) return {};
  const double p = k / n;
  return {p, std::sqrt(std::max(p * (1.0 - p), 0.0) / n)};
}

/// Plug-in estimates with standard errors; pixel edges supply the physical
/// coordinates for the conditional variances.
inline EmpiricalStatistics estimate_statistics(const SiftedPairs& s, const BinnedSource& src) {
  EmpiricalStatistics st;
  const double g = static_cast<double>(s.gates);
  st.p1 = binomial_estimate(static_cast<double>(s.class_counts[1]), g);
  st.p2 = binomial_estimate(static_cast<double>(s.class_counts[2]), g);
  st.p3 = binomial_estimate(static_cast<double>(s.class_counts[3]), g);
  st.sifted_fraction = binomial_estimate(static_cast<double>(s.sifted()), static_cast<double>(s.accepted));
  double uncorrelated = 0.0;
  for (const auto* v : {&s.momentum, &s.position})
    for (const auto& p : *v) uncorrelated += p.correlated ? 0.0 : 1.0;
  st.background_fraction = binomial_estimate(uncorrelated, static_cast<double>(s.sifted()));
  st.momentum = basis_statistics(s.momentum, src.momentum.alice_edges);
  st.position = basis_statistics(s.position, src.position.alice_edges);
  return st;
}

struct ChiSquareResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  bool passes(double significance) const { return p_value >= significance; }
};

/// Goodness of fit of observed counts against expected probabilities. Cells
/// with expected count below `min_expected` are pooled into one cell.
inline ChiSquareResult chi_square_goodness_of_fit(const Eigen::MatrixXd& counts, const Eigen::MatrixXd& probabilities,
                                                  double min_expected = 5.0) {
  require(counts.rows() == probabilities.rows() && counts.cols() == probabilities.cols(), "shape mismatch");
  const double n = counts.sum();
  require(n > 0.0, "no observations");
  double stat = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  std::size_t cells = 0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const double e = n * probabilities(i);
    if (e < min_expected) {
      pooled_obs += counts(i);
      pooled_exp += e;
      continue;
    }
    stat += (counts(i) - e) * (counts(i) - e) / e;
    ++cells;
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++cells;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.degrees_of_freedom = static_cast<double>(cells) - 1.0;
  if (r.degrees_of_freedom >= 1.0)
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(r.degrees_of_freedom), stat));
  return r;
}

/// Pearson test of homogeneity for two samples of a binary outcome
/// (k successes out of n in each).
inline ChiSquareResult chi_square_two_proportions(double k1, double n1, double k2, double n2) {
  require(n1 > 0.0 && n2 > 0.0, "both samples must be non-empty");
  const double pooled = (k1 + k2) / (n1 + n2);
  ChiSquareResult r;
  r.degrees_of_freedom = 1.0;
  if (pooled <= 0.0 || pooled >= 1.0) return r;
  const double obs[4] = {k1, n1 - k1, k2, n2 - k2};
  const double exp[4] = {n1 * pooled, n1 * (1.0 - pooled), n2 * pooled, n2 * (1.0 - pooled)};
  for (int i = 0; i < 4; ++i) r.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(1.0), r.statistic));
  return r;
}

struct HidingTest {
  double loss = 0.0;
  double lambda = 0.0;
  Estimate background_without_eve;  ///< no Eve, channel loss l
  Estimate background_with_eve;     ///< Eve at lambda_max(l) behind a lossless channel
  std::uint64_t sifted_without_eve = 0;
  std::uint64_t sifted_with_eve = 0;
  bool conclusive = false;  ///< both runs produced sifted events
  ChiSquareResult test;
};

/// Compares the uncorrelated-background fraction of sifted events with no
/// eavesdropper at loss l against Eve intercepting at lambda_max(l) while
/// replacing the channel by a lossless one.
inline HidingTest hiding_test(SimConfig cfg, double loss) {
  HidingTest h;
  h.loss = loss;
  h.lambda = lambda_max(loss, cfg.array);
  const BinnedSource src = bin_source(cfg.source, cfg.array);
  auto run = [&](double throughput, double lambda) {
    SimConfig c = cfg;
    c.channel.bob_throughput = throughput;
    c.attack.ratio = lambda;
    const auto events = simulate_pulses(c);
    return estimate_statistics(sift(events, c.pulses), src);
  };
  const auto honest = run(1.0 - loss, 0.0);
  const auto eve = run(1.0, h.lambda);
  h.background_without_eve = honest.background_fraction;
  h.background_with_eve = eve.background_fraction;
  h.sifted_without_eve = honest.momentum.pairs + honest.position.pairs;
  h.sifted_with_eve = eve.momentum.pairs + eve.position.pairs;
  const double n1 = static_cast<double>(h.sifted_without_eve), n2 = static_cast<double>(h.sifted_with_eve);
  h.conclusive = n1 > 0.0 && n2 > 0.0;
  if (!h.conclusive) return h;
  h.test = chi_square_two_proportions(std::round(honest.background_fraction.value * n1), n1,
                                      std::round(eve.background_fraction.value * n2), n2);
  return h;
}

inline void write_event_log_header(std::ostream& os) {
  os << "gate,alice_basis,bob_basis,alice_pixel,bob_pixel,alice_photon,bob_photon,"
        "eve_intercepted,eve_basis,eve_pixel,accepted,event_class,correlated\n";
}

/// One record per line; pixels are -1 for no click and -2 for multiple clicks.
inline void write_event_record(std::ostream& os, const EventRecord& e) {
  os << e.gate << ',' << to_string(e.alice_basis) << ',' << to_string(e.bob_basis) << ',' << e.alice_pixel << ','
     << e.bob_pixel << ',' << int(e.alice_photon) << ',' << int(e.bob_photon) << ',' << int(e.eve_intercepted) << ','
     << (e.eve_intercepted ? to_string(e.eve_basis) : "") << ',' << e.eve_pixel << ',' << int(e.accepted) << ','
     << e.event_class << ',' << int(e.correlated) << '\n';
}

}  // namespace sqkd
