#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sqkd/montecarlo.hpp"
#include "support.hpp"

namespace sqkd {
namespace {

SimConfig small_config(std::uint64_t pulses) {
  SimConfig c;
  c.pulses = pulses;
  c.array.pixels = 32;
  c.batch_size = 4096;
  return c;
}

bool same(const EventRecord& a, const EventRecord& b) {
  return a.gate == b.gate && a.alice_basis == b.alice_basis && a.bob_basis == b.bob_basis &&
         a.alice_pixel == b.alice_pixel && a.bob_pixel == b.bob_pixel && a.alice_photon == b.alice_photon &&
         a.bob_photon == b.bob_photon && a.eve_intercepted == b.eve_intercepted && a.eve_basis == b.eve_basis &&
         a.eve_pixel == b.eve_pixel && a.accepted == b.accepted && a.event_class == b.event_class &&
         a.correlated == b.correlated;
}

TEST(Simulation, IndependentOfWorkerCount) {
  SimConfig c = small_config(200'000);
  c.attack.ratio = 0.5;
  c.array.dark_count = 1e-4;
  const auto one = simulate_pulses(c);
  c.workers = 3;
  const auto three = simulate_pulses(c);
  ASSERT_EQ(one.size(), three.size());
  ASSERT_FALSE(one.empty());
  for (std::size_t i = 0; i < one.size(); ++i) ASSERT_TRUE(same(one[i], three[i])) << "record " << i;
  for (std::size_t i = 1; i < one.size(); ++i) ASSERT_LT(one[i - 1].gate, one[i].gate);
}

TEST(Simulation, SeedChangesStream) {
  SimConfig c = small_config(100'000);
  const auto a = simulate_pulses(c);
  c.seed = 2;
  const auto b = simulate_pulses(c);
  bool differ = a.size() != b.size();
  for (std::size_t i = 0; !differ && i < a.size(); ++i) differ = !same(a[i], b[i]);
  EXPECT_TRUE(differ);
}

TEST(Simulation, NoSourceNoNoiseNoEvents) {
  SimConfig c = small_config(100'000);
  c.source.pair_probability = 0.0;
  c.array.dark_count = 0.0;
  const auto events = simulate_pulses(c);
  EXPECT_TRUE(events.empty());
  EXPECT_EQ(sift(events, c.pulses).accepted, 0u);
}

TEST(Simulation, ClassTaxonomyIsClosed) {
  SimConfig c = small_config(300'000);
  c.array.dark_count = 1e-3;
  c.attack.ratio = 0.3;
  for (const auto& e : simulate_pulses(c)) {
    const bool single = e.alice_pixel >= 0 && e.bob_pixel >= 0;
    ASSERT_EQ(e.accepted, single);
    if (!e.accepted) {
      ASSERT_EQ(e.event_class, 0);
      continue;
    }
    ASSERT_EQ(e.event_class, 1 + int(e.alice_photon) + int(e.bob_photon));
    ASSERT_LT(e.alice_pixel, 32);
    ASSERT_LT(e.bob_pixel, 32);
    if (e.correlated) ASSERT_EQ(e.event_class, 3);
  }
}

TEST(Sift, SameBasisStreamDropsNothing) {
  std::vector<EventRecord> events(10);
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto& e = events[i];
    e.gate = i;
    e.alice_basis = e.bob_basis = i % 2 ? Basis::position : Basis::momentum;
    e.alice_pixel = e.bob_pixel = static_cast<int>(i);
    e.accepted = true;
    e.event_class = 3;
  }
  const auto s = sift(events, 10);
  EXPECT_EQ(s.dropped, 0u);
  EXPECT_EQ(s.momentum.size(), 5u);
  EXPECT_EQ(s.position.size(), 5u);
}

TEST(Estimators, DiagonalPairsGiveLogN) {
  for (std::size_t n : {2u, 8u, 32u}) {
    std::vector<SiftedPair> pairs;
    for (int r = 0; r < 10; ++r)
      for (std::size_t i = 0; i < n; ++i) pairs.push_back({int(i), int(i), 3, true});
    const auto st = basis_statistics(pairs, pixel_edges(1.0, n));
    EXPECT_NEAR(st.mi_plugin, std::log2(static_cast<double>(n)), 1e-12);
    EXPECT_EQ(st.conditional_variance, 0.0);
  }
}

TEST(Estimators, MillerMadowCorrectionArithmetic) {
  // Two symbols, four cells occupied, N = 4: plug-in 0, correction (4 - 2 - 2 + 1) / (8 ln 2).
  std::vector<SiftedPair> pairs = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  const auto st = basis_statistics(pairs, pixel_edges(1.0, 2));
  EXPECT_NEAR(st.mi_plugin, 0.0, 1e-15);
  EXPECT_NEAR(st.mi_miller_madow, -1.0 / (8.0 * std::log(2.0)), 1e-15);
}

TEST(ChiSquare, TwoProportionsMatchesClosedForm) {
  // N (ad - bc)^2 / (r1 r2 c1 c2)
  const double a = 30, b = 70, c = 45, d = 55;
  const double n = a + b + c + d;
  const double expect = n * (a * d - b * c) * (a * d - b * c) / ((a + b) * (c + d) * (a + c) * (b + d));
  const auto r = chi_square_two_proportions(a, a + b, c, c + d);
  EXPECT_NEAR(r.statistic, expect, 1e-12 * expect);
  EXPECT_NEAR(r.p_value, std::erfc(std::sqrt(expect / 2.0)), 1e-12);
  EXPECT_NEAR(chi_square_two_proportions(10, 100, 20, 200).p_value, 1.0, 1e-12);
}

TEST(ChiSquare, ExactCountsFitPerfectly) {
  Eigen::MatrixXd p(2, 2);
  p << 0.1, 0.2, 0.3, 0.4;
  const auto r = chi_square_goodness_of_fit(1000.0 * p, p);
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_EQ(r.degrees_of_freedom, 3.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

class Defaults32 : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = small_config(2'000'000);
    cfg_.batch_size = 65536;
    src_ = new BinnedSource(bin_source(cfg_.source, cfg_.array));
    sifted_ = new SiftedPairs(sift(simulate_pulses(cfg_), cfg_.pulses));
  }
  static void TearDownTestSuite() {
    delete src_;
    delete sifted_;
  }
  static SimConfig cfg_;
  static BinnedSource* src_;
  static SiftedPairs* sifted_;
};
SimConfig Defaults32::cfg_;
BinnedSource* Defaults32::src_ = nullptr;
SiftedPairs* Defaults32::sifted_ = nullptr;

TEST_F(Defaults32, ClassFrequenciesMatchEventProbabilities) {
  const auto st = estimate_statistics(*sifted_, *src_);
  const auto e = event_probabilities(cfg_.source.pair_probability, cfg_.channel, cfg_.array);
  const double g = static_cast<double>(cfg_.pulses);
  for (const auto& [est, p] : {std::pair{st.p1, e.p1}, std::pair{st.p2, e.p2()}, std::pair{st.p3, e.p3}}) {
    const double sigma = std::sqrt(p * (1.0 - p) / g);
    EXPECT_LE(std::abs(est.value - p), 4.0 * sigma);
  }
  EXPECT_LE(std::abs(st.sifted_fraction.value - 0.5), 4.0 * std::sqrt(0.25 / static_cast<double>(sifted_->accepted)));
}

TEST_F(Defaults32, SiftedPairsFitNoisyJoint) {
  const auto e = event_probabilities(cfg_.source.pair_probability, cfg_.channel, cfg_.array);
  const auto st = estimate_statistics(*sifted_, *src_);
  EXPECT_TRUE(chi_square_goodness_of_fit(st.momentum.counts, noisy_pixel_joint(src_->momentum, e).probabilities)
                  .passes(0.01));
  EXPECT_TRUE(chi_square_goodness_of_fit(st.position.counts, noisy_pixel_joint(src_->position, e).probabilities)
                  .passes(0.01));
}

TEST_F(Defaults32, MutualInformationNearAnalytic) {
  const auto e = event_probabilities(cfg_.source.pair_probability, cfg_.channel, cfg_.array);
  const auto st = estimate_statistics(*sifted_, *src_);
  EXPECT_NEAR(st.momentum.mi_miller_madow, discrete_mutual_information(noisy_pixel_joint(src_->momentum, e)), 0.05);
  EXPECT_NEAR(st.position.mi_miller_madow, discrete_mutual_information(noisy_pixel_joint(src_->position, e)), 0.05);
}

TEST(Convergence, ErrorShrinksWithPulses) {
  SimConfig c = small_config(1'000'000);
  c.batch_size = 65536;
  const auto src = bin_source(c.source, c.array);
  const auto e = event_probabilities(c.source.pair_probability, c.channel, c.array);
  const double mk = discrete_mutual_information(noisy_pixel_joint(src.momentum, e));
  const double mr = discrete_mutual_information(noisy_pixel_joint(src.position, e));
  auto error = [&](std::uint64_t pulses) {
    c.pulses = pulses;
    const auto st = estimate_statistics(sift(simulate_pulses(c), pulses), src);
    const double z3 = (st.p3.value - e.p3) / e.p3;
    const double dk = st.momentum.mi_miller_madow - mk, dr = st.position.mi_miller_madow - mr;
    return std::sqrt(z3 * z3 + dk * dk + dr * dr);
  };
  EXPECT_LT(error(10'000'000), error(1'000'000));
}

TEST(EventLog, HeaderAndRecordHaveMatchingFields) {
  std::ostringstream os;
  write_event_log_header(os);
  EventRecord e;
  e.gate = 7;
  e.alice_pixel = 3;
  e.bob_pixel = EventRecord::multi_click;
  write_event_record(os, e);
  std::istringstream is(os.str());
  std::string header, line;
  std::getline(is, header);
  std::getline(is, line);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(line.begin(), line.end(), ','));
  EXPECT_EQ(line.rfind("7,momentum,momentum,3,-2,", 0), 0u);
}

}  // namespace
}  // namespace sqkd
