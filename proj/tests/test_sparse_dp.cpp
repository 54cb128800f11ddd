#include "oracles.hpp"
#include "sfp/baseline.hpp"
#include "sfp/sparse_dp.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sfp;
using sfp::testing::line_metric;

namespace {

struct Setup {
  MetricSpace m;
  SfpInstance inst;
  NetHierarchy h;
  Decomposition d;
  CellParams p;
};

Setup make_setup(std::uint64_t seed, int pairs, int extra) {
  auto g = sfp::testing::random_instance(seed, pairs, extra, 20.0);
  auto r = rescale_instance(g.metric, g.instance.pairs, 0.5);
  Setup s;
  s.m = r.metric;
  s.inst = SfpInstance{r.pairs};
  const int L = std::max(height_count(s.m, 4), 2);
  s.h = build_hierarchy(s.m, 4, L);
  std::mt19937_64 rng(seed);
  s.d = build_hierarchy_decomposition(s.m, s.h, rng);
  s.p = make_cell_params(0.5, 2, 4, L);
  return s;
}

// Two leaves under one height-1 cluster under a chain to the root.
Setup line_setup(const std::vector<double>& xs, std::vector<TerminalPair> pairs,
                 const std::vector<std::vector<std::vector<PointId>>>& levels) {
  Setup s;
  s.m = line_metric(xs);
  s.inst = SfpInstance{pairs};
  s.d.s = 4;
  s.d.L = static_cast<int>(levels.size());
  s.h = build_hierarchy(s.m, 4, s.d.L);
  s.d.hierarchy = s.h;
  const auto n = static_cast<std::size_t>(s.m.size());
  s.d.at.assign(levels.size(), std::vector<int>(n, -1));
  for (int ht = s.d.L - 1; ht >= 0; --ht)
    for (const auto& grp : levels[ht]) {
      Cluster c;
      c.id = static_cast<int>(s.d.clusters.size());
      c.height = ht;
      c.center = grp.front();
      c.points = grp;
      std::sort(c.points.begin(), c.points.end());
      c.members = from_ids(n, grp);
      c.parent = ht + 1 < s.d.L ? s.d.at[ht + 1][grp.front()] : -1;
      for (PointId q : grp) s.d.at[ht][q] = c.id;
      if (c.parent >= 0) s.d.clusters[c.parent].children.push_back(c.id);
      s.d.clusters.push_back(c);
    }
  for (auto& c : s.d.clusters) c.portals = c.points;  // every point is a portal
  s.p = make_cell_params(0.5, 2, 4, s.d.L);
  return s;
}

DpContext context(const Setup& s, DpCaps caps = {}) { return DpContext(s.m, s.d, s.inst, caps, s.p); }

}  // namespace

TEST(BaseEntry, SingleZeroEntryPassingConstraints) {
  auto s = make_setup(2, 2, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  for (int leaf : s.d.clusters_at(0)) {
    const auto& t = dp.tables[leaf];
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0].val, 0);
    EXPECT_EQ(t.rows[0].e, base_entry(s.d, leaf));
    std::string why;
    EXPECT_TRUE(internal_constraints_ok(ctx, t.rows[0].e, &why)) << why;
  }
}

TEST(BaseEntry, OtherLeafEntriesAreInfinite) {
  auto s = make_setup(2, 2, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  const int leaf = s.d.clusters_at(0).front();
  Entry e = base_entry(s.d, leaf);
  e.R.clear();
  e.Y.clear();
  e.g[leaf].clear();
  e.P.clear();
  EXPECT_EQ(eval_value(ctx, dp, e), kInf);
}

TEST(FinalEntry, UniqueAndInternallyValid) {
  auto s = make_setup(3, 2, 3);
  auto ctx = context(s);
  const Entry f = final_entry(s.d);
  EXPECT_EQ(f.cluster, s.d.root().id);
  EXPECT_TRUE(f.R.empty() && f.Y.empty() && f.bas.empty() && f.nbas.empty() && f.g.empty() && f.P.empty());
  EXPECT_TRUE(internal_constraints_ok(ctx, f));
}

TEST(InternalConstraints, RegionReachingTwoPartsIsRejected) {
  auto s = line_setup({0, 1, 10, 11}, {{0, 2}}, {{{0}, {1}, {2}, {3}}, {{0, 1}, {2, 3}}, {{0, 1, 2, 3}}});
  auto ctx = context(s);
  const int c = s.d.cluster_of(1, 0);
  Entry e;
  e.cluster = c;
  e.R = {0, 1};
  e.Y = {{0}, {1}};
  e.bas = {c};
  e.g[c] = {0, 1};
  e.P = {{0}, {1}};
  std::string why;
  EXPECT_FALSE(internal_constraints_ok(ctx, e, &why));
  e.g[c] = {0};
  EXPECT_TRUE(internal_constraints_ok(ctx, e, &why)) << why;
}

TEST(InternalConstraints, BasicCellMissingSiblingIsRejected) {
  auto s = line_setup({0, 1, 10, 11}, {{0, 2}}, {{{0}, {1}, {2}, {3}}, {{0, 1}, {2, 3}}, {{0, 1, 2, 3}}});
  auto ctx = context(s);
  const int c = s.d.cluster_of(1, 0), a = s.d.cluster_of(0, 0), b = s.d.cluster_of(0, 1);
  Entry e;
  e.cluster = c;
  e.R = {0};
  e.Y = {{0}};
  e.bas = sorted_unique({c, a});
  e.g[c] = {};
  e.g[a] = {0};
  e.P = {{0}};
  std::string why;
  EXPECT_FALSE(internal_constraints_ok(ctx, e, &why));
  EXPECT_EQ(why, "basic cell missing a sibling");
  e.nbas = {b};
  e.g[b] = {};
  EXPECT_TRUE(internal_constraints_ok(ctx, e, &why)) << why;
}

TEST(Consistency, TrivialSingleChildComposition) {
  // Cluster {2} at height 1 has the single leaf {2} as its child.
  auto s = line_setup({0, 1, 10}, {{0, 2}}, {{{0}, {1}, {2}}, {{0, 1}, {2}}, {{0, 1, 2}}});
  auto ctx = context(s);
  const int c = s.d.cluster_of(1, 2), leaf = s.d.cluster_of(0, 2);
  const Entry child = base_entry(s.d, leaf);
  Entry e;
  e.cluster = c;
  e.R = {2};
  e.Y = {{2}};
  e.bas = {c};
  e.g[c] = {0};
  e.P = {{0}};
  std::string why;
  EXPECT_TRUE(internal_constraints_ok(ctx, e, &why)) << why;
  EXPECT_TRUE(consistency_check(ctx, e, {&child}, {}, &why)) << why;

  Row kid;
  kid.e = child;
  detail::attach_regions(s.d, kid);
  auto res = compose_entry(ctx, c, {&kid}, {}, {2});
  ASSERT_TRUE(res.entry) << res.fail;
  EXPECT_EQ(*res.entry, e);
}

TEST(Consistency, Step1ViolationIsRejected) {
  auto s = line_setup({0, 1, 10}, {{0, 2}}, {{{0}, {1}, {2}}, {{0, 1}, {2}}, {{0, 1, 2}}});
  auto ctx = context(s);
  const int c = s.d.cluster_of(1, 2), leaf = s.d.cluster_of(0, 2);
  const Entry child = base_entry(s.d, leaf);
  Entry e;
  e.cluster = c;
  e.R = {0, 2};  // 0 lies outside C
  e.Y = {{0, 2}};
  e.bas = {c};
  e.g[c] = {0};
  e.P = {{0}};
  std::string why;
  EXPECT_FALSE(consistency_check(ctx, e, {&child}, {}, &why));
  EXPECT_EQ(why, "step 1");
}

TEST(Consistency, FlippedGValueIsRejected) {
  int mutations = 0;
  for (std::uint64_t seed : {2, 3, 6, 8}) {
    auto s = make_setup(seed, 2, 3);
    DpCaps loose;
    loose.r_cap = loose.rho_cap = 64;
    auto ctx = context(s, loose);
    auto opt = brute_force_opt(s.m, s.inst, all_points(s.m));
    auto w = decompose_solution(ctx, make_portal_respecting(opt, s.m, s.d));
    ASSERT_TRUE(w.ok) << w.reason;
    for (const auto& cl : s.d.clusters) {
      if (cl.height == 0) continue;
      const Row& row = w.rows[cl.id];
      std::vector<const Entry*> I;
      for (int k : cl.children) I.push_back(&w.rows[k].e);
      ASSERT_TRUE(consistency_check(ctx, row.e, I, row.G));
      if (row.e.Y.empty()) continue;
      for (const auto& [inducer, v] : row.e.g) {
        Entry bad = row.e;
        bad.g[inducer] = v.empty() ? std::vector<int>{0} : std::vector<int>{};
        EXPECT_FALSE(consistency_check(ctx, bad, I, row.G)) << "cluster " << cl.id << " region " << inducer;
        ++mutations;
      }
    }
  }
  EXPECT_GT(mutations, 0);
}

TEST(Enumerate, ZeroPortalCapOnlyYieldsEmptyR) {
  auto s = make_setup(2, 2, 3);
  DpCaps caps;
  caps.r_cap = 0;
  auto ctx = context(s, caps);
  auto dp = run_dp(ctx);
  for (const auto& cl : s.d.clusters) {
    if (cl.height == 0) continue;
    for (const auto& row : dp.tables[cl.id].rows) EXPECT_TRUE(row.e.R.empty());
  }
}

TEST(Enumerate, LeafParentAssemblesBaseEntries) {
  auto s = make_setup(3, 2, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  for (int c : s.d.clusters_at(1)) {
    bool found = false;
    for (const auto& row : dp.tables[c].rows) {
      bool all_base = true;
      for (std::size_t k = 0; k < row.kids.size(); ++k)
        all_base = all_base && dp.tables[s.d[c].children[k]].rows[row.kids[k]].e == base_entry(s.d, s.d[c].children[k]);
      found = found || all_base;
    }
    EXPECT_TRUE(found) << "cluster " << c;
  }
}

TEST(Enumerate, OracleWitnessEntriesArePresent) {
  // Four points: every cluster's witness entry must be in its table with a
  // value no larger than the witness value.
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    auto s = make_setup(seed, 2, 0);
    ASSERT_LE(s.m.size(), 4);
    DpCaps caps;
    caps.r_cap = 6;
    caps.rho_cap = 16;
    auto ctx = context(s, caps);
    auto dp = run_dp(ctx);
    ASSERT_FALSE(dp.stats.caps.any());
    auto opt = brute_force_opt(s.m, s.inst, all_points(s.m));
    auto w = decompose_solution(ctx, make_portal_respecting(opt, s.m, s.d));
    ASSERT_TRUE(w.ok) << w.reason;
    for (const auto& cl : s.d.clusters) {
      const Row* r = dp.tables[cl.id].find(w.rows[cl.id].e);
      ASSERT_NE(r, nullptr) << "seed " << seed << " cluster " << cl.id;
      EXPECT_LE(r->val, w.rows[cl.id].val);
    }
  }
}

TEST(EvalValue, InconsistentEntryIsInfinite) {
  auto s = make_setup(2, 2, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  const int c = s.d.clusters_at(1).front();
  ASSERT_FALSE(dp.tables[c].rows.empty());
  Entry e = dp.tables[c].rows.front().e;
  if (!e.R.empty()) {
    e.P.push_back({static_cast<int>(e.Y.size())});  // P no longer partitions Y
  } else {
    e.bas.clear();
  }
  EXPECT_EQ(eval_value(ctx, dp, e), kInf);
}

TEST(EvalValue, MemoLookupIsStable) {
  auto s = make_setup(3, 2, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  const Dist v1 = eval_value(ctx, dp, final_entry(s.d));
  const Dist v2 = eval_value(ctx, dp, final_entry(s.d));
  EXPECT_EQ(v1, dp.value);
  EXPECT_EQ(v1, v2);
}

TEST(Extraction, SinglePairIsConnected) {
  auto s = make_setup(4, 1, 3);
  auto ctx = context(s);
  auto dp = run_dp(ctx);
  ASSERT_LT(dp.value, kInf);
  auto f = extract_solution(ctx, dp);
  EXPECT_TRUE(sfp::testing::bfs_feasible(f, s.inst.pairs));
  EXPECT_EQ(weight(f, s.m), dp.value);
}

TEST(Extraction, MissingFinalValueThrows) {
  auto s = make_setup(2, 2, 3);
  auto ctx = context(s);
  DpResult empty;
  empty.tables.resize(s.d.clusters.size());
  EXPECT_THROW(extract_solution(ctx, empty), MissingBackPointer);
}

TEST(Extraction, WeightIdentityAndFeasibility) {
  int finite = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    auto s = make_setup(seed, 2, 3);
    auto ctx = context(s);
    auto dp = run_dp(ctx);
    EXPECT_EQ(dp.stats.verify_failures, 0u) << "seed " << seed;
    if (dp.value >= kInf) continue;
    ++finite;
    auto f = extract_solution(ctx, dp);
    EXPECT_EQ(weight(f, s.m), dp.value) << "seed " << seed;
    EXPECT_TRUE(is_feasible(f, s.inst, s.d.num_points())) << "seed " << seed;
    // Never below the optimum.
    EXPECT_GE(dp.value, weight(brute_force_opt(s.m, s.inst, all_points(s.m)), s.m));
  }
  EXPECT_EQ(finite, 8);
}

TEST(Determinism, RepeatedRunsAgree) {
  auto s = make_setup(5, 2, 3);
  auto ctx = context(s);
  auto a = run_dp(ctx), b = run_dp(ctx);
  EXPECT_EQ(a.value, b.value);
  ASSERT_LT(a.value, kInf);
  EXPECT_EQ(extract_solution(ctx, a).edges(), extract_solution(ctx, b).edges());
  EXPECT_EQ(a.stats.entries, b.stats.entries);
}

TEST(CapMonotonicity, RaisingCapsNeverHurts) {
  for (std::uint64_t seed : {1, 3, 6}) {
    auto s = make_setup(seed, 2, 3);
    DpCaps small;
    small.r_cap = 2;
    small.rho_cap = 4;
    small.edge_cap = 3;
    small.verify = false;
    DpCaps big = small;
    big.r_cap = 4;
    big.rho_cap = 8;
    big.edge_cap = 6;
    const Dist lo = run_dp(context(s, big)).value, hi = run_dp(context(s, small)).value;
    EXPECT_LE(lo, hi) << "seed " << seed;
  }
}

TEST(Witness, ValueBoundedByPortalRespectingGw) {
  int fits = 0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    auto s = make_setup(seed, 2, 3);
    auto ctx = context(s);
    auto dp = run_dp(ctx);
    auto gw = gw_primal_dual(s.m, s.inst);
    auto fp = make_portal_respecting(make_net_respecting(gw, s.m, s.h, 0.5), s.m, s.d);
    auto f_star = enforce_cell_property(fp, s.m, s.d, s.p).forest;
    auto w = decompose_solution(ctx, f_star);
    if (!w.ok || w.caps.any()) continue;
    ++fits;
    EXPECT_LE(dp.value, weight(f_star, s.m)) << "seed " << seed;
    EXPECT_EQ(w.rows[s.d.root().id].val, weight(f_star, s.m));
  }
  EXPECT_GT(fits, 0);
}
