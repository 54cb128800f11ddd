#include "oracles.hpp"
#include "sfp/baseline.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sfp;
using sfp::testing::line_metric;

TEST(IsFeasible, Examples) {
  EXPECT_TRUE(is_feasible(Forest{}, {{{0, 0}}}, 3));
  EXPECT_FALSE(is_feasible(Forest{}, {{{0, 1}}}, 3));
  Forest star({{0, 1}, {0, 2}, {0, 3}});
  EXPECT_TRUE(is_feasible(star, {{{1, 2}, {3, 0}}}, 4));
}

TEST(IsFeasible, MatchesBfsOnRandomForests) {
  std::mt19937_64 rng(7);
  for (int it = 0; it < 200; ++it) {
    Forest f;
    for (int e = 0; e < 5; ++e) f.add(static_cast<int>(rng() % 9), static_cast<int>(rng() % 9));
    std::vector<TerminalPair> pairs{{static_cast<int>(rng() % 9), static_cast<int>(rng() % 9)}};
    EXPECT_EQ(is_feasible(f, {pairs}, 9), sfp::testing::bfs_feasible(f, pairs));
  }
}

TEST(Normalized, DropsTrivialAndDuplicates) {
  auto n = normalized({{3, 1}, {1, 3}, {2, 2}, {0, 4}});
  EXPECT_EQ(n.pairs, (std::vector<TerminalPair>{{0, 4}, {1, 3}}));
}

// u=0 at 0; a at 8 = 0.5 s^2; b at 40 = (t + delta + 1) s^2 for s=4, t=1, delta=0.5.
struct LineFixture : ::testing::Test {
  MetricSpace m = line_metric({0, 8, 40, 2, 5, 11, 20, 30, 13});
  NetHierarchy h = build_hierarchy(m, 4, height_count(m, 4));
};

TEST_F(LineFixture, AuxiliaryFarPairDropped) {
  AuxParams p{1, 0, 1.0, 0.5};
  EXPECT_TRUE(auxiliary_subinstance(m, h, {{{6, 7}}}, p).empty());
}

TEST_F(LineFixture, AuxiliaryInsidePairKept) {
  AuxParams p{2, 0, 1.0, 0.5};
  auto sub = auxiliary_subinstance(m, h, {{{3, 1}}}, p);
  EXPECT_EQ(sub.pairs, (std::vector<TerminalPair>{{1, 3}}));
}

TEST(Auxiliary, BridgesToNearestNetPoint) {
  // u = 0; a = 8 = 0.5 s^2 (id 3); b = 40 = (t + delta + 1) s^2 (id 2); s = 4, t = 1, delta = 0.5.
  auto m = line_metric({0, 7, 40, 8, 20, 30});
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  // delta s^i = 8, so j = 1 (4 < 8 <= 16)
  EXPECT_EQ(aux_net_height(4, 2, 0.5), 1);
  PointId expect = -1;
  Dist best = kInf;
  for (PointId q = 0; q < m.size(); ++q)
    if (h.in_net(1, q) && m.dist(3, q) < best) {
      best = m.dist(3, q);
      expect = q;
    }
  EXPECT_EQ(expect, 1);
  auto sub = auxiliary_subinstance(m, h, {{{3, 2}}}, AuxParams{2, 0, 1.0, 0.5});
  EXPECT_EQ(sub.pairs, (std::vector<TerminalPair>{{1, 3}}));
}

TEST(AuxNetHeight, ConventionsDifferAtExactPowers) {
  // delta s^i = 4 = s^1 exactly
  EXPECT_EQ(aux_net_height(4, 2, 0.25), 0);
  EXPECT_EQ(split_net_height(4, 2, 0.25), 1);
  EXPECT_THROW(aux_net_height(4, 0, 0.5), HeightUnderflow);
}

TEST_F(LineFixture, SplitAllInside) {
  auto r = split_critical(m, h, {{{1, 3}, {4, 5}}}, 1, 0, 0, 0.0, 0.5);
  EXPECT_TRUE(r.i2.empty());
  EXPECT_EQ(r.i1.size(), 2u);
}

TEST_F(LineFixture, SplitAllOutside) {
  SfpInstance in{{{2, 7}}};
  auto r = split_critical(m, h, in, 1, 0, 0, 0.0, 0.5);
  EXPECT_TRUE(r.i1.empty());
  EXPECT_EQ(r.i2, in);
}

TEST_F(LineFixture, SplitMarginAndBridgeAtHeightZero) {
  // i = 1, h = 0.5: B = B(0, 18), margin 0.9 * 4 = 3.6, so the outer ball has radius 21.6.
  auto r = split_critical(m, h, {{{4, 6}}}, 1, 0, 0, 0.5, 0.9);
  EXPECT_EQ(r.i1.size(), 1u);  // 5 inside, 20 within the margin
  EXPECT_TRUE(r.i2.empty());
  // 13 inside, 40 beyond: j = 0 so the bridge is 13 itself and the I1 pair is trivial.
  auto r2 = split_critical(m, h, {{{8, 2}}}, 1, 0, 0, 0.5, 0.9);
  EXPECT_TRUE(r2.i1.empty());
  EXPECT_EQ(r2.i2.pairs, (std::vector<TerminalPair>{{2, 8}}));
}

TEST(Split, BridgingNetPointAppearsOnBothSides) {
  // points: u=0, a=3, far b=100, others
  auto m = line_metric({0, 3, 100, 1, 6, 9, 50});
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  // i = 2: B = B(0, 4*16 = 64)... b=100 outside 64 + 0.5*16 = 72
  // j: 4^j <= 8 < 4^(j+1): j = 1
  auto r = split_critical(m, h, {{{1, 2}}}, 2, 0, 0, 0.0, 0.5);
  EXPECT_EQ(r.j, 1);
  PointId expect = -1;
  Dist best = kInf;
  for (PointId q = 0; q < m.size(); ++q)
    if (h.in_net(1, q) && m.dist(1, q) < best) {
      best = m.dist(1, q);
      expect = q;
    }
  ASSERT_NE(expect, 1);
  ASSERT_EQ(r.i1.size(), 1u);
  ASSERT_EQ(r.i2.size(), 1u);
  auto has = [&](const SfpInstance& in, PointId p) { return in.pairs[0].a == p || in.pairs[0].b == p; };
  EXPECT_TRUE(has(r.i1, expect));
  EXPECT_TRUE(has(r.i2, expect));
  EXPECT_TRUE(has(r.i1, 1));
  EXPECT_TRUE(has(r.i2, 2));
}

TEST(Split, UnionOfFeasibleSolutionsIsFeasible) {
  std::mt19937_64 rng(11);
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto g = sfp::testing::random_instance(seed, 3, 6, 40.0);
    auto r = rescale_instance(g.metric, g.instance.pairs, 0.5);
    int L = height_count(r.metric, 4);
    auto h = build_hierarchy(r.metric, 4, L);
    SfpInstance inst{r.pairs};
    for (int trial = 0; trial < 5; ++trial) {
      int i = 1 + static_cast<int>(rng() % std::max(1, L - 1));
      const auto& net = h.net(i);
      PointId u = net[rng() % net.size()];
      int lambda = static_cast<int>(rng() % 2);
      double hh = std::uniform_real_distribution<double>(0, 0.5)(rng);
      SplitResult sp;
      try {
        sp = split_critical(r.metric, h, inst, i, u, lambda, hh, 0.5);
      } catch (const HeightUnderflow&) {
        continue;
      }
      auto f1 = gw_primal_dual(r.metric, sp.i1);
      auto f2 = gw_primal_dual(r.metric, sp.i2);
      ASSERT_TRUE(is_feasible(f1, sp.i1, r.metric.size()));
      ASSERT_TRUE(is_feasible(f2, sp.i2, r.metric.size()));
      f1.add(f2);
      EXPECT_TRUE(sfp::testing::bfs_feasible(f1, normalized(inst.pairs).pairs));
      ++checked;
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Auxiliary, MonotoneInT) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto g = sfp::testing::random_instance(seed, 4, 4, 30.0);
    auto r = rescale_instance(g.metric, g.instance.pairs, 0.5);
    auto h = build_hierarchy(r.metric, 4, height_count(r.metric, 4));
    SfpInstance inst = normalized(r.pairs);
    PointId u = h.net(2).front();
    for (double t : {1.0, 1.5, 2.5}) {
      AuxParams p{2, u, t, 0.5};
      auto small = auxiliary_subinstance(r.metric, h, inst, p);
      p.t = t + 1.0;
      auto big = auxiliary_subinstance(r.metric, h, inst, p);
      for (auto pr : inst.pairs) {
        bool both_inside = detail::within(r.metric, u, pr.a, t * 16.0L) && detail::within(r.metric, u, pr.b, t * 16.0L);
        if (!both_inside) continue;
        EXPECT_NE(std::find(small.pairs.begin(), small.pairs.end(), pr), small.pairs.end());
        EXPECT_NE(std::find(big.pairs.begin(), big.pairs.end(), pr), big.pairs.end());
      }
    }
  }
}
