#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "otl/grid.hpp"
#include "otl/prior.hpp"

using namespace otl;

TEST(Prior, GaussianAroundDensityAtLogisticTruth) {
  const auto p = PriorSpec::uniform_gaussian_around(Box::cube(2, 0, 1), 0.1);
  const double lw = conditional_log_density(p, ParamPoint{0.3, 0.5}, ParamPoint{0.2, 0.4});
  const double one_axis = 1.0 / (0.1 * std::sqrt(2.0 * std::numbers::pi)) * std::exp(-0.5);
  EXPECT_NEAR(std::exp(lw), one_axis * one_axis, 1e-12);
  EXPECT_NEAR(std::exp(lw), 5.855, 1e-3);
}

TEST(Prior, SharedCoordinatesMustAgree) {
  const auto p = PriorSpec::uniform_gaussian_around(Box::cube(2, 0, 1), 0.25, 1);
  EXPECT_EQ(conditional_log_density(p, ParamPoint{0.4, 0.5}, ParamPoint{0.5, 0.4}), -INFINITY);
  EXPECT_NEAR(conditional_log_density(p, ParamPoint{0.5, 0.5}, ParamPoint{0.5, 0.4}),
              -std::log(0.25 * std::sqrt(2.0 * std::numbers::pi)) - 0.5 * 0.16, 1e-12);
}

TEST(Prior, HardWindowClippedToBox) {
  const auto p = PriorSpec::uniform_hard_window(Box::cube(1, 0, 1), 0.1);
  EXPECT_NEAR(std::exp(conditional_log_density(p, ParamPoint{0.5}, ParamPoint{0.5})), 1.0 / 0.2, 1e-12);
  // Window [0.85, 1.05] cut to [0.85, 1].
  EXPECT_NEAR(std::exp(conditional_log_density(p, ParamPoint{0.9}, ParamPoint{0.95})), 1.0 / 0.15, 1e-9);
  EXPECT_EQ(conditional_log_density(p, ParamPoint{0.6}, ParamPoint{0.8}), -INFINITY);
  // Closed window: the edge itself is in the support.
  EXPECT_GT(conditional_log_density(p, ParamPoint{0.7}, ParamPoint{0.8}), -INFINITY);
}

TEST(Prior, SourceFreeIgnoresSource) {
  const auto p = PriorSpec::source_free_uniform(Box::cube(2, 0, 1));
  EXPECT_FALSE(p.depends_on_source());
  EXPECT_EQ(conditional_log_density(p, ParamPoint{0.1, 0.9}, ParamPoint{0.9, 0.1}), 0.0);
}

TEST(Prior, TruncatedGaussianMarginalIntegratesToOne) {
  const auto p = PriorSpec::source_free_uniform(Box::cube(2, 0, 1)).with_gaussian_marginal({0.9, 0.2}, {0.3, 0.5});
  const GridSpec g(p.box(), 400);
  const auto nodes = g.nodes();
  double mass = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    mass += std::exp(marginal_log_density(p, std::span<const double>(nodes).subspan(2 * i, 2)));
  }
  EXPECT_NEAR(mass * std::exp(g.log_cell_volume()), 1.0, 1e-4);
}

TEST(Prior, BernoulliWindowIsImproperAtTruth) {
  const auto p = PriorSpec::uniform_hard_window(Box::cube(1, 1e-4, 1 - 1e-4), 0.1);
  const auto rep = validate_properness(p, ParamPoint{0.8}, ParamPoint{0.6}, 0.05, 0.05, 11);
  EXPECT_TRUE(rep.marginal_proper);
  EXPECT_FALSE(rep.conditional_proper);
  ASSERT_TRUE(rep.witness_s && rep.witness_t);
  EXPECT_DOUBLE_EQ((*rep.witness_s)[0], 0.8);
  EXPECT_DOUBLE_EQ((*rep.witness_t)[0], 0.6);
}

TEST(Prior, WindowProperWhenNeighborhoodsFit) {
  // Positivity on the neighborhoods holds iff |t* - s*| + delta_s + delta_t <= delta.
  const auto p = PriorSpec::uniform_hard_window(Box::cube(1, 0, 1), 0.2);
  EXPECT_TRUE(validate_properness(p, ParamPoint{0.5}, ParamPoint{0.55}, 0.05, 0.05, 21).proper());
  EXPECT_TRUE(validate_properness(p, ParamPoint{0.5}, ParamPoint{0.6}, 0.05, 0.05, 21).proper());
  EXPECT_FALSE(validate_properness(p, ParamPoint{0.5}, ParamPoint{0.62}, 0.05, 0.05, 21).proper());
}

TEST(Prior, GaussianAroundIsProperEverywhere) {
  const auto p = PriorSpec::uniform_gaussian_around(Box::cube(2, 0, 1), 0.1);
  const auto rep = validate_properness(p, ParamPoint{0.8, 0.2}, ParamPoint{0.3, 0.5}, 0.1, 0.1, 5);
  EXPECT_TRUE(rep.proper());
}

TEST(Prior, ProperenessRejectsBadRadii) {
  const auto p = PriorSpec::source_free_uniform(Box::cube(1, 0, 1));
  EXPECT_THROW(validate_properness(p, ParamPoint{0.5}, ParamPoint{0.5}, 0.0, 0.1, 5), PreconditionError);
}
