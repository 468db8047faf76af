#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "otl/asymptotics.hpp"

using namespace otl;

namespace {

constexpr double kTwoPiE = 2.0 * std::numbers::pi * std::numbers::e;

FisherBlocks identity_blocks(std::size_t d, std::size_t j) {
  const auto I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  return fisher_blocks_from(I, I, j);
}

double breakdown_sum(const AsymptoteResult& r) {
  double s = 0.0;
  for (const auto& [name, v] : r.breakdown()) s += v;
  return s;
}

}  // namespace

TEST(Asymptotics, ScalarConstantCase) {
  // n / (2 pi e) and the Fisher term cancel exactly.
  const auto r = asymptote_scalar(kTwoPiE, 0.0, 1);
  EXPECT_NEAR(r.value, 0.0, 1e-12);
  EXPECT_NEAR(r.fisher, 0.5 * std::log(kTwoPiE), 1e-12);
  EXPECT_NEAR(r.fisher, 1.4189, 1e-4);
}

TEST(Asymptotics, ScalarBernoulliExample) {
  const auto r = asymptote_scalar(25.0 / 6.0, 0.0, 100);
  EXPECT_NEAR(r.value, 0.5 * std::log(100.0 / kTwoPiE) + 0.5 * std::log(25.0 / 6.0), 1e-12);
  EXPECT_NEAR(r.value, 1.597, 1e-3);
  EXPECT_NEAR(asymptote_scalar(25.0 / 6.0, 0.0, 500).value, 2.402, 1e-3);
}

TEST(Asymptotics, DoublingNAddsHalfLogTwo) {
  const double a = asymptote_scalar(3.0, -0.2, 40).value;
  const double b = asymptote_scalar(3.0, -0.2, 80).value;
  EXPECT_NEAR(b - a, 0.5 * std::log(2.0), 1e-12);
}

TEST(Asymptotics, ScalarRejectsNonpositiveFisher) {
  EXPECT_THROW(asymptote_scalar(0.0, 0.0, 10), DomainError);
  EXPECT_THROW(asymptote_scalar(-1.0, 0.0, 10), DomainError);
}

TEST(Asymptotics, BreakdownSumsToValue) {
  const auto r = asymptote_general(identity_blocks(3, 1), -0.7, 150, 900, 3, 1);
  EXPECT_NEAR(breakdown_sum(r), r.value, 1e-12);
  EXPECT_NEAR(r.shared, 0.5 * std::log(1.0 + 150.0 / 900.0), 1e-12);
  EXPECT_NEAR(r.prior, 0.7, 0.0);
}

TEST(Asymptotics, GeneralReducesToScalarExactly) {
  Eigen::MatrixXd f(1, 1);
  f(0, 0) = 25.0 / 6.0;
  const auto blocks = fisher_blocks_from(f, f, 0);
  for (std::size_t n : {1u, 7u, 100u, 500u}) {
    const auto g = asymptote_general(blocks, 0.3, n, 5, 1, 0);
    const auto s = asymptote_scalar(25.0 / 6.0, 0.3, n);
    EXPECT_EQ(g.value, s.value) << "n=" << n;
  }
}

TEST(Asymptotics, AllSharedIdentity) {
  for (std::size_t d : {1u, 2u, 3u}) {
    const auto r = asymptote_general(identity_blocks(d, d), 0.4, 50, 50, d, d);
    EXPECT_NEAR(r.value, 0.5 * static_cast<double>(d) * std::log(2.0) - 0.4, 1e-12);
  }
}

TEST(Asymptotics, SingleSharedDeterminantIsScalar) {
  Eigen::Matrix2d fs;
  fs << 3.0, 0.4, 0.4, 1.5;
  Eigen::Matrix2d ft;
  ft << 2.0, 0.3, 0.3, 1.2;
  const auto b = fisher_blocks_from(fs, ft, 1);
  const auto r = asymptote_general(b, 0.0, 120, 700, 2, 1);
  const double dt = 2.0 - 0.09 / 1.2;
  const double ds = 3.0 - 0.16 / 1.5;
  EXPECT_NEAR(r.shared, 0.5 * std::log(1.0 + (120.0 / 700.0) * dt / ds), 1e-12);
}

TEST(Asymptotics, SingularDeltaIsNamed) {
  auto b = identity_blocks(2, 1);
  b.delta_s(0, 0) = 0.0;
  try {
    asymptote_general(b, 0.0, 10, 10, 2, 1);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("Delta_s"), std::string::npos);
  }
}

TEST(Asymptotics, BlockShapeMismatch) {
  EXPECT_THROW(asymptote_general(identity_blocks(2, 1), 0.0, 10, 10, 2, 0), PreconditionError);
}

TEST(Asymptotics, RateRegimes) {
  const auto b = identity_blocks(1, 1);
  for (const auto& row : rate_regime_sweep(b, RateRegime::Linear, {10, 100, 1000})) {
    EXPECT_NEAR(row.cost, 0.5 * std::log(2.0), 1e-12);
  }
  const auto sup = rate_regime_sweep(b, RateRegime::Superlinear, {100});
  EXPECT_EQ(sup[0].m, 10000u);
  EXPECT_NEAR(sup[0].cost, 0.5 * std::log(1.01), 1e-12);
  EXPECT_NEAR(sup[0].cost, 0.00498, 1e-5);
  const auto sub = rate_regime_sweep(b, RateRegime::Sublinear, {100, 10000, 1000000});
  EXPECT_EQ(sub[1].m, 100u);
  EXPECT_NEAR(sub[1].cost, 0.5 * std::log(101.0), 1e-12);
  EXPECT_NEAR(sub[1].cost, 2.307, 1e-3);
  EXPECT_LT(sub[0].cost, sub[1].cost);
  EXPECT_LT(sub[1].cost, sub[2].cost);
  EXPECT_THROW(rate_regime_sweep(identity_blocks(1, 0), RateRegime::Linear, {10}), PreconditionError);
}

TEST(Asymptotics, SublinearSourceSizeIsCeilSqrt) {
  EXPECT_EQ(regime_source_size(RateRegime::Sublinear, 1), 1u);
  EXPECT_EQ(regime_source_size(RateRegime::Sublinear, 2), 2u);
  EXPECT_EQ(regime_source_size(RateRegime::Sublinear, 9), 3u);
  EXPECT_EQ(regime_source_size(RateRegime::Sublinear, 10), 4u);
}

TEST(Asymptotics, GeneralLossBound) {
  EXPECT_EQ(general_loss_bound(1.0, 50, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(general_loss_bound(1.0, 2, 1.0), 2.0);
  EXPECT_NEAR(general_loss_bound(1.0, 100, 1.597), 17.87, 5e-3);
  EXPECT_THROW(general_loss_bound(1.0, 10, -0.1), DomainError);
}

namespace {

SegmentSchedule two_segments(std::size_t n1, std::size_t n2) {
  SegmentSchedule s;
  s.shared_with_source = 1;
  s.segments = {Segment{ParamPoint{0.5}, n1, 0}, Segment{ParamPoint{0.5}, n2, 0}};
  return s;
}

SegmentBlocks unit_blocks(bool first) {
  SegmentBlocks b;
  b.delta_ct = Eigen::MatrixXd::Identity(1, 1);
  b.delta_cst = Eigen::MatrixXd::Identity(1, 1);
  b.fisher_t = Eigen::MatrixXd(0, 0);
  if (!first) {
    b.delta_t = Eigen::MatrixXd(0, 0);
    b.delta_t_prev = Eigen::MatrixXd(0, 0);
  }
  return b;
}

}  // namespace

TEST(Asymptotics, TimeVariantWorkedExample) {
  const auto sched = two_segments(100, 100);
  const double v = time_variant_bound({unit_blocks(true), unit_blocks(false)}, sched, {0.0, 0.0}, 1.0, 10000);
  const double expected = std::sqrt(2.0 * 100.0 * (std::log(1.01) + std::log(1.0 + 100.0 / 10100.0)));
  EXPECT_NEAR(v, expected, 1e-12);
  EXPECT_NEAR(v, 1.99010, 1e-4);
}

TEST(Asymptotics, TimeVariantSingleSegmentCombinesBoundAndAsymptote) {
  // k = 1: the bound is M * sqrt(2 n A) with A the general asymptote.
  Eigen::Matrix2d f;
  f << 2.0, 0.3, 0.3, 1.5;
  const auto blocks = fisher_blocks_from(f, f, 1);
  const std::size_t n = 300;
  const std::size_t m = 2000;
  const double log_w = 0.8;
  SegmentSchedule s;
  s.shared_with_source = 1;
  s.segments = {Segment{ParamPoint{0.5, 0.5}, n, 0}};
  SegmentBlocks b;
  b.delta_ct = blocks.delta_t;
  b.delta_cst = blocks.delta_s;
  b.fisher_t = blocks.specific_t;
  const double bound = time_variant_bound({b}, s, {log_w}, 1.5, m);
  const double a = asymptote_general(blocks, log_w, n, m, 2, 1).value;
  EXPECT_NEAR(bound, general_loss_bound(1.5, n, a), 1e-9);
}

TEST(Asymptotics, TimeVariantMissingBlocksAreRejected) {
  const auto sched = two_segments(100, 100);
  auto second = unit_blocks(false);
  second.delta_t_prev.reset();
  EXPECT_THROW(time_variant_bound({unit_blocks(true), second}, sched, {0.0, 0.0}, 1.0, 100), UnsupportedInput);
  EXPECT_THROW(time_variant_bound({unit_blocks(true)}, sched, {0.0, 0.0}, 1.0, 100), UnsupportedInput);
  auto first = unit_blocks(true);
  first.fisher_t.reset();
  EXPECT_THROW(time_variant_bound({first, unit_blocks(false)}, sched, {0.0, 0.0}, 1.0, 100), UnsupportedInput);
}
