#include <cmath>

#include <gtest/gtest.h>

#include "sqkd/detection.hpp"
#include "support.hpp"

namespace sqkd {
namespace {

using test::for_all;
using test::Gen;

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return v;
}

DetectorArrayParams ideal_coverage(DetectorArrayParams a) {
  a.coverage = 1.0;
  return a;
}

class DefaultSource : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto p = default_source();
    momentum_ = new FactorizedJoint(momentum_joint(p));
    position_ = new FactorizedJoint(position_joint(p));
  }
  static void TearDownTestSuite() {
    delete momentum_;
    delete position_;
  }
  static FactorizedJoint* momentum_;
  static FactorizedJoint* position_;
};
FactorizedJoint* DefaultSource::momentum_ = nullptr;
FactorizedJoint* DefaultSource::position_ = nullptr;

TEST(EventProbabilities, NoDarkCounts) {
  DetectorArrayParams a = ideal_coverage({});
  a.dark_count = 0.0;
  ChannelParams c;
  c.alice_throughput = 0.9;
  c.bob_throughput = 0.3;
  const auto e = event_probabilities(0.01, c, a);
  EXPECT_EQ(e.p1, 0.0);
  EXPECT_EQ(e.p2(), 0.0);
  EXPECT_DOUBLE_EQ(e.p3, 0.01 * 0.6 * 0.6 * 0.9 * 0.3);
}

TEST(EventProbabilities, HandArithmeticSinglePixel) {
  // n = 1, P_PDC = 0.01, eta = 0.6, t = 1, P_dark = 0.5:
  //   P1 = (0.99 + 0.01 * 0.4 * 0.4) * 0.25 = 0.2479
  //   P2 = 2 * 0.01 * 0.6 * 0.4 * (0.5 * 0.5) = 0.0012
  //   P3 = 0.01 * 0.36 * 0.25 = 0.0009
  DetectorArrayParams a = ideal_coverage({});
  a.pixels = 1;
  a.dark_count = 0.5;
  const auto e = event_probabilities(0.01, ChannelParams{}, a);
  EXPECT_NEAR(e.p1, 0.2479, 1e-12 * 0.2479);
  EXPECT_NEAR(e.p2_alice_photon, 0.0006, 1e-12 * 0.0006);
  EXPECT_NEAR(e.p2_bob_photon, 0.0006, 1e-12 * 0.0006);
  EXPECT_NEAR(e.p3, 0.0009, 1e-12 * 0.0009);
}

TEST(EventProbabilities, CoverageScalesEfficiency) {
  DetectorArrayParams a;
  a.dark_count = 0.0;
  a.coverage = 0.9;
  EXPECT_DOUBLE_EQ(event_probabilities(0.01, {}, a).p3, 0.01 * 0.54 * 0.54);
}

TEST(EventProbabilities, BackgroundSmallAtReferenceThroughput) {
  ChannelParams c;
  c.bob_throughput = 0.36;
  const auto e = event_probabilities(0.01, c, DetectorArrayParams{});
  EXPECT_LT(e.background_fraction(), 0.01);
}

TEST(EventProbabilities, ClassesAreProbabilitiesOfDisjointEvents) {
  for_all(200, 31, [](Gen& g) {
    DetectorArrayParams a;
    a.pixels = g.integer(1, 512);
    a.dark_count = g.log_uniform(1e-9, 0.2);
    a.efficiency = g.uniform(0.0, 1.0);
    a.coverage = g.uniform(0.5, 1.0);
    ChannelParams c;
    c.alice_throughput = g.uniform(0.0, 1.0);
    c.bob_throughput = g.uniform(0.0, 1.0);
    const auto e = event_probabilities(g.uniform(0.0, 1.0), c, a);
    for (double v : {e.p1, e.p2_alice_photon, e.p2_bob_photon, e.p3}) EXPECT_GE(v, 0.0);
    EXPECT_LE(e.accepted(), 1.0 + 1e-12);
  });
}

TEST(EventProbabilities, RejectsBadInputs) {
  DetectorArrayParams a;
  a.dark_count = 1.0;
  EXPECT_THROW(event_probabilities(0.01, {}, a), ParameterError);
  EXPECT_THROW(event_probabilities(1.5, {}, DetectorArrayParams{}), ParameterError);
  ChannelParams c;
  c.bob_throughput = -0.1;
  EXPECT_THROW(event_probabilities(0.01, c, DetectorArrayParams{}), ParameterError);
}

TEST(Channel, DecibelDistanceConversion) {
  ChannelParams c;
  c.bob_throughput = 0.36;
  EXPECT_NEAR(c.distance_km(), 4.437, 1e-3);
  EXPECT_NEAR(ChannelParams::from_distance_km(4.437).bob_throughput, 0.36, 1e-4);
  EXPECT_NEAR(ChannelParams::from_loss_db(35.0).loss(), 1.0 - std::pow(10.0, -3.5), 1e-15);
}

TEST(PixelEdges, UniformAndSymmetric) {
  const auto e = pixel_edges(2.0, 8);
  ASSERT_EQ(e.size(), 9u);
  EXPECT_DOUBLE_EQ(e.front(), -2.0);
  EXPECT_DOUBLE_EQ(e.back(), 2.0);
  EXPECT_DOUBLE_EQ(pixel_centers(e)[0], -1.75);
}

TEST_F(DefaultSource, SinglePixelHoldsEverything) {
  DetectorArrayParams a;
  a.pixels = 1;
  const auto b = bin_distribution(*momentum_, a);
  EXPECT_NEAR(b.probabilities(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(discrete_mutual_information(b), 0.0, 1e-12);
}

TEST_F(DefaultSource, NestedBinningIsBlockSum) {
  DetectorArrayParams coarse, fine;
  coarse.pixels = 64;
  fine.pixels = 128;
  for (const auto* j : {momentum_, position_}) {
    const auto c = bin_distribution(*j, coarse);
    const auto f = bin_distribution(*j, fine);
    double worst = 0.0;
    for (Eigen::Index a = 0; a < 64; ++a)
      for (Eigen::Index b = 0; b < 64; ++b)
        worst = std::max(worst, std::abs(f.probabilities.block(2 * a, 2 * b, 2, 2).sum() - c.probabilities(a, b)));
    EXPECT_LE(worst, 1e-12);
  }
}

TEST_F(DefaultSource, BinnedMutualInformationApproachesContinuousFromBelow) {
  for (const auto* j : {momentum_, position_}) {
    double previous = 0.0, previous_gap = INFINITY;
    for (std::size_t n : {64u, 128u, 256u, 512u, 1024u}) {
      DetectorArrayParams a;
      a.pixels = n;
      const double mi = discrete_mutual_information(bin_distribution(*j, a));
      EXPECT_GT(mi, previous);
      EXPECT_LT(mi, j->mutual_information());
      const double gap = j->mutual_information() - mi;
      EXPECT_LT(gap, previous_gap);
      previous = mi;
      previous_gap = gap;
    }
  }
  // Values at n = 256 and 1024 for the record.
  DetectorArrayParams a;
  a.pixels = 256;
  EXPECT_NEAR(discrete_mutual_information(bin_distribution(*momentum_, a)), 5.48702, 1e-4);
  EXPECT_NEAR(discrete_mutual_information(bin_distribution(*position_, a)), 5.52023, 1e-4);
  a.pixels = 1024;
  EXPECT_NEAR(discrete_mutual_information(bin_distribution(*position_, a)), position_->mutual_information(), 0.05);
}

TEST_F(DefaultSource, BinnedTablesAreExchangeSymmetricDistributions) {
  const auto b = bin_distribution(*momentum_, DetectorArrayParams{});
  EXPECT_NEAR(b.probabilities.sum(), 1.0, 1e-12);
  EXPECT_GE(b.probabilities.minCoeff(), 0.0);
  EXPECT_LE((b.probabilities - b.probabilities.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(b.in_array_mass, 0.9995, 1e-4);
}

TEST_F(DefaultSource, DirectGridBinningAgreesWithFactorized) {
  // Dual route on a source small enough for the sampled amplitude.
  const auto p = test::weak_source();
  const auto amp = build_amplitude(p, auto_grid(p, 1024));
  DetectorArrayParams a;
  a.pixels = 32;
  const auto direct = bin_distribution(to_distribution(amp), a);
  const auto factorized = bin_distribution(momentum_joint(p), a);
  EXPECT_NEAR(discrete_mutual_information(direct), discrete_mutual_information(factorized), 0.02);
}

TEST_F(DefaultSource, NoiseLimits) {
  const auto signal = bin_distribution(*momentum_, DetectorArrayParams{});
  DetectorArrayParams dark_free;
  dark_free.dark_count = 0.0;
  const auto clean = noisy_pixel_joint(signal, event_probabilities(0.01, {}, dark_free));
  EXPECT_LE((clean.probabilities - signal.probabilities).cwiseAbs().maxCoeff(), 1e-15);

  const auto no_pairs = noisy_pixel_joint(signal, event_probabilities(0.0, {}, DetectorArrayParams{}));
  EXPECT_LE((no_pairs.probabilities.array() - 1.0 / (128.0 * 128.0)).abs().maxCoeff(), 1e-15);

  ChannelParams c;
  c.bob_throughput = 0.36;
  const auto noisy = noisy_pixel_joint(signal, event_probabilities(0.01, c, DetectorArrayParams{}));
  EXPECT_NEAR(noisy.probabilities.sum(), 1.0, 1e-12);
  EXPECT_LT(discrete_mutual_information(noisy), discrete_mutual_information(signal));

  const auto e = event_probabilities(0.01, c, DetectorArrayParams{});
  const double total = e.p1 + e.p2_alice_photon + e.p2_bob_photon + e.p3;
  double worst = 0.0;
  for (Eigen::Index a = 0; a < 128; ++a) {
    double pa = 0.0, pb = 0.0;
    for (Eigen::Index k = 0; k < 128; ++k) {
      pa += signal.probabilities(a, k);
      pb += signal.probabilities(k, a);
    }
    for (Eigen::Index b = 0; b < 128; ++b) {
      double qa = 0.0;
      for (Eigen::Index k = 0; k < 128; ++k) qa += signal.probabilities(k, b);
      const double expect =
          (e.p3 * signal.probabilities(a, b) + e.p2_alice_photon * pa / 128.0 + e.p2_bob_photon * qa / 128.0 +
           e.p1 / (128.0 * 128.0)) /
          total;
      worst = std::max(worst, std::abs(noisy.probabilities(a, b) - expect));
    }
  }
  EXPECT_LE(worst, 1e-15);
}

TEST_F(DefaultSource, WitnessWithoutDarkCountsHoldsEverywhere) {
  DetectorArrayParams a;
  a.dark_count = 0.0;
  BinnedSource src{bin_distribution(*momentum_, a), bin_distribution(*position_, a)};
  const auto t = linspace(0.01, 0.99, 25);
  const auto scan = witness_threshold_scan(src, 0.01, a, t);
  EXPECT_FALSE(scan.threshold.has_value());
  EXPECT_TRUE(scan.satisfied_everywhere);
}

TEST_F(DefaultSource, WitnessThresholdRecorded) {
  DetectorArrayParams a;
  BinnedSource src{bin_distribution(*momentum_, a), bin_distribution(*position_, a)};
  const auto scan = witness_threshold_scan(src, 0.01, a, linspace(0.01, 0.99, 99));
  ASSERT_TRUE(scan.threshold.has_value());
  EXPECT_NEAR(*scan.threshold, 0.3836, 2e-3);
  EXPECT_FALSE(witness_at(src, 0.01, a, ChannelParams{.bob_throughput = 0.2}).witness.satisfied);
  EXPECT_TRUE(witness_at(src, 0.01, a, ChannelParams{.bob_throughput = 0.6}).witness.satisfied);
}

TEST(WitnessScan, RejectsUnsortedThroughputs) {
  BinnedSource src;
  const std::vector<double> t = {0.5, 0.4};
  EXPECT_THROW(witness_threshold_scan(src, 0.01, DetectorArrayParams{}, t), ParameterError);
}

}  // namespace
}  // namespace sqkd
