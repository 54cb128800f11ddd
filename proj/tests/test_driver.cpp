#include "oracles.hpp"
#include "sfp/driver.hpp"

#include <gtest/gtest.h>

using namespace sfp;

namespace {

struct Scaled {
  RescaleResult r;
  NetHierarchy h;
  SfpInstance inst;
};

Scaled scaled(const Generated& g, int s = 4) {
  Scaled out;
  out.r = rescale_instance(g.metric, g.instance.pairs, 0.5);
  out.h = build_hierarchy(out.r.metric, s, std::max(height_count(out.r.metric, s), 2));
  out.inst = normalized(out.r.pairs);
  return out;
}

MetricSpace plane(const std::vector<std::vector<double>>& pts) { return build_metric_from_points(pts); }

}  // namespace

TEST(DriverConfig, Validation) {
  DriverConfig c;
  EXPECT_NO_THROW(validate(c));
  c.eps = 1.0;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = DriverConfig{};
  c.mode = Mode::theory;
  c.s = 3;
  EXPECT_THROW(validate(c), InvalidArgument);
  c = DriverConfig{};
  c.n_trials = 0;
  EXPECT_THROW(validate(c), InvalidArgument);
  EXPECT_EQ(parse_mode("theory"), Mode::theory);
  EXPECT_THROW(parse_mode("fast"), InvalidArgument);
}

TEST(HeuristicT, EmptySubinstanceIsZero) {
  auto m = plane({{0, 0}, {1, 0}, {500, 0}, {501, 0}});
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  DriverConfig c;
  ASSERT_FALSE(scan_heights(h, c).empty());
  const int i = scan_heights(h, c).front();
  SfpInstance inst{{{2, 3}}};
  // Ball around 0 of radius 4 s^i does not reach 500 for i = 3.
  ASSERT_LT(4.0 * std::pow(4.0, i), 499.0);
  ASSERT_TRUE(h.in_net(i, 0) || h.in_net(i, 1));
  const PointId u = h.in_net(i, 0) ? 0 : 1;
  EXPECT_EQ(heuristic_T(m, h, inst, i, u, 4.0, c).value, 0);
  EXPECT_EQ(heuristic_T(m, h, SfpInstance{}, i, u, 4.0, c).value, 0);
}

TEST(HeuristicT, SinglePairWithinBlowUp) {
  auto m = plane({{0, 0}, {30, 0}, {3, 40}});
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  DriverConfig c;
  SfpInstance inst{{{0, 1}}};
  for (int i : scan_heights(h, c))
    for (PointId u : h.net(i)) {
      auto hv = heuristic_T(m, h, inst, i, u, 4.0, c);
      EXPECT_LE(static_cast<double>(hv.value), 2.0 * (1 + c.eps) * static_cast<double>(m.dist(0, 1)));
    }
}

TEST(HeuristicT, SandwichedByOracle) {
  DriverConfig c;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto sc = scaled(sfp::testing::random_instance(seed, 3, 4, 20.0));
    const auto& m = sc.r.metric;
    for (int i : scan_heights(sc.h, c))
      for (PointId u : sc.h.net(i)) {
        auto sub = auxiliary_subinstance(m, sc.h, sc.inst, AuxParams{i, u, 4.0, c.delta()});
        if (sub.empty()) continue;
        const Dist opt = weight(brute_force_opt(m, sub, all_points(m)), m);
        const Dist t = heuristic_T(m, sc.h, sc.inst, i, u, 4.0, c).value;
        EXPECT_GE(t, opt);
        EXPECT_LE(static_cast<double>(t), 2.0 * (1 + c.eps) * static_cast<double>(opt));
        ++checked;
      }
  }
  EXPECT_GT(checked, 10);
}

TEST(SparsityScan, EmptyAndInfiniteThresholdGiveNone) {
  auto sc = scaled(sfp::testing::random_instance(1, 3, 3, 20.0));
  DriverConfig c;
  EXPECT_FALSE(sparsity_scan(sc.r.metric, sc.h, SfpInstance{}, 1e-9, c));
  EXPECT_FALSE(sparsity_scan(sc.r.metric, sc.h, sc.inst, std::numeric_limits<double>::infinity(), c));
}

TEST(SparsityScan, DenseClumpIsCritical) {
  // A clump of four pairs near the origin and one pair far away.
  std::vector<std::vector<double>> pts;
  for (int j = 0; j < 8; ++j) pts.push_back({static_cast<double>(3 * (j % 4)), static_cast<double>(3 * (j / 4))});
  pts.push_back({5000, 0});
  pts.push_back({5010, 0});
  auto m = plane(pts);
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  SfpInstance inst{{{0, 7}, {1, 6}, {2, 5}, {3, 4}, {8, 9}}};
  DriverConfig c;
  auto crit = sparsity_scan(m, h, inst, 1e-3, c);
  ASSERT_TRUE(crit);
  EXPECT_EQ(crit->i, scan_heights(h, c).front());
  EXPECT_LT(m.dist_to(crit->u, {0, 1, 2, 3, 4, 5, 6, 7}), m.scale_pow(4, crit->i));
  // Maximizer: no net point at that height does better.
  for (PointId u : h.net(crit->i)) EXPECT_LE(heuristic_T(m, h, inst, crit->i, u, 4.0, c).value, crit->value);
}

TEST(ChooseLambda, StableHeuristicGivesZero) {
  auto m = plane({{0, 0}, {100, 0}, {0, 100}, {100, 100}});
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  DriverConfig c;
  SfpInstance inst{{{0, 3}, {1, 2}}};
  ASSERT_FALSE(scan_heights(h, c).empty());
  const int i = scan_heights(h, c).front();
  const PointId u = h.net(i).front();
  // Every pair lies inside B(u, 4 s^i), so T does not change with lambda.
  const Dist t0 = heuristic_T(m, h, inst, i, u, 4.0, c).value;
  EXPECT_EQ(heuristic_T(m, h, inst, i, u, 6.0, c).value, t0);
  EXPECT_EQ(choose_lambda(m, h, inst, i, u, c), 0);
}

TEST(ChooseLambda, TwoShellSatisfiesRatioTest) {
  // Inner pair close to u, heavy shell just beyond radius 4 s^3 = 256 units.
  std::vector<std::vector<double>> pts{{0, 0}, {1, 0}};
  for (int j = 0; j < 6; ++j) {
    const double a = j * 1.047;
    pts.push_back({300 * std::cos(a), 300 * std::sin(a)});
    pts.push_back({330 * std::cos(a + 0.5), 330 * std::sin(a + 0.5)});
  }
  auto m = plane(pts);
  auto h = build_hierarchy(m, 4, height_count(m, 4));
  DriverConfig c;
  std::vector<TerminalPair> pairs{{0, 1}};
  for (int j = 0; j < 6; ++j) pairs.push_back({2 + 2 * j, 3 + 2 * j});
  SfpInstance inst{pairs};
  const int i = 3;
  ASSERT_TRUE(h.in_net(i, 0));
  const int lambda = choose_lambda(m, h, inst, i, 0, c);
  auto T = [&](int l) { return static_cast<double>(heuristic_T(m, h, inst, i, 0, 4.0 + 2.0 * l, c).value); };
  EXPECT_GT(T(1), 30 * c.k * T(0));  // the shell makes lambda = 0 fail
  EXPECT_EQ(lambda, 1);
  EXPECT_LE(T(lambda + 1), 30 * c.k * T(lambda));
}

TEST(Alg, SinglePairIsDirectEdge) {
  auto m = plane({{0, 0}, {3, 4}, {10, 10}});
  auto res = run_alg(m, SfpInstance{{{0, 1}}}, DriverConfig{});
  EXPECT_TRUE(res.feasible);
  EXPECT_EQ(res.cost, m.dist(0, 1));
}

TEST(Alg, EmptyInstance) {
  auto m = plane({{0, 0}, {3, 4}});
  auto res = run_alg(m, SfpInstance{}, DriverConfig{});
  EXPECT_TRUE(res.forest.empty());
  EXPECT_TRUE(res.feasible);
}

TEST(Alg, FeasibleAndDeterministic) {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto g = sfp::testing::random_instance(seed, 2, 3, 20.0);
    DriverConfig c;
    c.seed = seed;
    c.n_trials = 3;
    auto a = run_alg(g.metric, g.instance, c), b = run_alg(g.metric, g.instance, c);
    EXPECT_TRUE(a.feasible);
    EXPECT_EQ(a.cost, b.cost);
    EXPECT_EQ(a.forest.edges(), b.forest.edges());
    EXPECT_GE(a.cost, weight(brute_force_opt(g.metric, g.instance, all_points(g.metric)), g.metric));
  }
}

TEST(Alg, CriticalSplitsTerminateAndStayFeasible) {
  int critical = 0;
  for (std::uint64_t seed : {1, 2, 4, 5}) {
    auto g = sfp::testing::random_instance(seed, 3, 2, 20.0);
    DriverConfig c;
    c.seed = seed;
    c.n_trials = 2;
    c.q0 = 1e-3;  // nearly every ball is critical
    auto res = run_alg(g.metric, g.instance, c);
    EXPECT_TRUE(res.feasible);
    EXPECT_LE(res.stats.max_depth, g.metric.size() * res.L);
    for (const auto& nd : res.stats.nodes) critical += nd.kind == "critical";
  }
  EXPECT_GT(critical, 0);
}

TEST(Alg, TheoryModeRecordsParameters) {
  auto g = sfp::testing::random_instance(3, 2, 2, 20.0);
  DriverConfig c;
  c.mode = Mode::theory;
  c.n_trials = 1;
  auto res = run_alg(g.metric, g.instance, c);
  ASSERT_TRUE(res.theory);
  EXPECT_GE(res.theory->s, 4);
  EXPECT_GT(res.theory->q0, 0);
  EXPECT_TRUE(res.feasible);
}
