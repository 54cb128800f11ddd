#include "oracles.hpp"
#include "sfp/baseline.hpp"

#include <gtest/gtest.h>

using namespace sfp;
using sfp::testing::line_metric;

TEST(BuildMetric, CollinearPoints) {
  auto m = line_metric({0, 1, 2});
  EXPECT_EQ(m.dist(0, 2), 2 * kDefaultScale);
  EXPECT_EQ(m.dist(0, 1), kDefaultScale);
}

TEST(BuildMetric, SinglePoint) {
  auto m = line_metric({3.5});
  EXPECT_EQ(m.size(), 1);
  EXPECT_EQ(m.diameter(), 0);
}

TEST(BuildMetric, UnitSquareDiagonalIsCeiled) {
  auto m = build_metric_from_points({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  // ceil(sqrt(2) * 1e6)
  EXPECT_EQ(m.dist(0, 2), 1414214);
  EXPECT_EQ(m.dist(1, 3), 1414214);
}

TEST(BuildMetric, RejectsTriangleViolation) {
  EXPECT_THROW(build_metric_from_matrix({{0, 1, 5}, {1, 0, 1}, {5, 1, 0}}), TriangleViolation);
}

TEST(BuildMetric, RejectsNegativeDistance) {
  EXPECT_THROW(build_metric_from_matrix({{0, -1}, {-1, 0}}), NegativeDistance);
}

TEST(GreedyNet, LargeRadiusGivesSmallestId) {
  auto m = line_metric({5, 0, 2, 9});
  EXPECT_EQ(greedy_net(m, {3, 1, 2}, 100 * kDefaultScale), std::vector<PointId>{1});
}

TEST(GreedyNet, SmallRadiusKeepsEverything) {
  auto m = line_metric({0, 1, 3, 7});
  EXPECT_EQ(greedy_net(m, all_points(m), kDefaultScale / 2), all_points(m));
}

TEST(GreedyNet, LineOfFiveRadiusOne) {
  auto m = line_metric({0, 1, 2, 3, 4});
  EXPECT_EQ(greedy_net(m, all_points(m), kDefaultScale), (std::vector<PointId>{0, 2, 4}));
}

TEST(GreedyNet, AlwaysPackingAndCover) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto g = sfp::testing::random_instance(seed, 4, 8, 20.0);
    for (Dist rho : {Dist{500'000}, Dist{2'000'000}, Dist{7'000'000}}) {
      auto net = greedy_net(g.metric, all_points(g.metric), rho);
      EXPECT_TRUE(verify_packing_cover(g.metric, net, all_points(g.metric), rho)) << seed;
    }
  }
}

TEST(BuildHierarchy, SinglePoint) {
  auto m = line_metric({0});
  auto h = build_hierarchy(m, 4, 3);
  for (int i = 0; i <= 3; ++i) EXPECT_EQ(h.net(i), std::vector<PointId>{0});
}

TEST(BuildHierarchy, LineNested) {
  auto m = line_metric({0, 1, 2, 3, 4, 5, 6, 7, 8});
  auto h = build_hierarchy(m, 2, 3);
  EXPECT_EQ(h.net(0), all_points(m));
  for (int i = 1; i <= 3; ++i) {
    EXPECT_TRUE(verify_packing_cover(m, h.net(i), all_points(m), m.scale_pow(2, i))) << i;
    for (PointId p : h.net(i)) {
      EXPECT_TRUE(h.in_net(i - 1, p));
    }
  }
}

TEST(BuildHierarchy, UnitPairWithScaleFour) {
  auto m = line_metric({0, 1});
  auto h = build_hierarchy(m, 4, 1);
  EXPECT_EQ(h.net(1).size(), 1u);
}

TEST(BuildHierarchy, RandomInstancesNestedPackingCover) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = sfp::testing::random_instance(seed, 3, 10, 30.0);
    auto r = rescale_instance(g.metric, g.instance.pairs, 0.5);
    int L = height_count(r.metric, 4);
    auto h = build_hierarchy(r.metric, 4, L);
    EXPECT_EQ(h.net(L - 1).size(), 1u);
    for (int i = 1; i <= L; ++i) {
      // packing, cover and the cardinality bound with c = 1 on planar instances
      EXPECT_TRUE(verify_packing_cover(r.metric, h.net(i), all_points(r.metric), r.metric.scale_pow(4, i), 2.0));
      for (PointId p : h.net(i)) {
        EXPECT_TRUE(h.in_net(i - 1, p));
      }
    }
  }
}

TEST(VerifyPackingCover, Examples) {
  auto m = line_metric({0, 1, 2, 4});
  EXPECT_TRUE(verify_packing_cover(m, all_points(m), all_points(m), kDefaultScale / 2));
  EXPECT_FALSE(verify_packing_cover(m, {}, all_points(m), kDefaultScale));
  EXPECT_FALSE(verify_packing_cover(m, {0, 1}, all_points(m), kDefaultScale));
}

TEST(Rescale, DegenerateAndEmpty) {
  auto m = line_metric({0, 1});
  EXPECT_THROW(rescale_instance(m, {}, 0.5), EmptyInstance);
  EXPECT_THROW(rescale_instance(m, {{0, 0}, {1, 1}}, 0.5), DegenerateInstance);
}

TEST(Rescale, NetRadiusTwoPairs) {
  // R = 100, n = 2, eps = 0.5: radius 100 * 0.5 / (32 * 4) = 0.390625 units.
  auto m = line_metric({0, 100, 0.2, 50, 60, 100.1});
  auto r = rescale_instance(m, {{0, 1}, {3, 4}}, 0.5);
  EXPECT_EQ(r.net_radius, 390625);
  // 0.2 snaps onto 0 and 100.1 onto 100
  EXPECT_EQ(r.metric.size(), 4);
  EXPECT_EQ(r.to_original[r.snap[2]], 0);
  EXPECT_EQ(r.to_original[r.snap[5]], 1);
}

TEST(Rescale, IdentityOnSeparatedIntegerMetric) {
  auto m = line_metric({0, 1, 3, 6});
  auto r = rescale_instance(m, {{0, 3}}, 0.5);
  ASSERT_EQ(r.metric.size(), 4);
  EXPECT_EQ(r.factor, 1);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) EXPECT_EQ(r.metric.dist(a, b), m.dist(a, b));
}

TEST(Rescale, RaisesSmallDistancesToUnit) {
  auto m = line_metric({0, 0.25, 2.0});
  auto r = rescale_instance(m, {{0, 2}}, 0.01);
  EXPECT_EQ(r.factor, 4);
  EXPECT_GE(r.metric.min_nonzero(), kDefaultScale);
  EXPECT_NO_THROW(verify_metric(r.metric));
}

TEST(Rescale, PreservesOptimumWithinEps) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto g = sfp::testing::random_instance(seed, 2, 2, 10.0);
    const double eps = 0.5;
    auto r = rescale_instance(g.metric, g.instance.pairs, eps);
    auto before = brute_force_opt(g.metric, g.instance, all_points(g.metric));
    auto after = brute_force_opt(r.metric, {r.pairs}, all_points(r.metric));
    auto lifted = lift_forest(after, r, g.instance.pairs);
    EXPECT_TRUE(is_feasible(lifted, g.instance, static_cast<std::size_t>(g.metric.size())));
    EXPECT_LE(static_cast<double>(weight(lifted, g.metric)), (1 + eps) * static_cast<double>(weight(before, g.metric)) + 1);
  }
}
