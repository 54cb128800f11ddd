#pragma once

#include "sfp/baseline.hpp"
#include "sfp/sparse_dp.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>

namespace sfp {

inline std::string to_string(Mode m) { return m == Mode::theory ? "theory" : "practical"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "theory") return Mode::theory;
  if (s == "practical") return Mode::practical;
  throw InvalidArgument("unknown mode: " + s);
}

inline DpCaps practical_caps() {
  DpCaps c;
  c.verify = false;
  return c;
}

struct DriverConfig {
  double eps = 0.5;
  double k = 2.0;
  int s = 4;
  int L = 0;               // 0: derived from the diameter
  double q0 = 0;           // 0: calibrated; +inf disables the scan
  double q0_factor = 4.0;  // calibration multiplier
  int n_trials = 8;
  DpCaps caps = practical_caps();
  int base_case_size = 1;
  Mode mode = Mode::practical;
  std::uint64_t seed = 1;
  std::function<void(const std::string&)> log;  // optional trace sink
  // Optional observer of every fresh DP trial; the forest is null when the
  // final value stayed infinite.
  std::function<void(const MetricSpace&, const Decomposition&, const SfpInstance&, const Forest*)> on_trial;

  double delta() const { return eps / (8.0 * k); }
  DecompositionParams decomposition() const {
    DecompositionParams p;
    p.k = k;
    p.mode = mode;
    p.eps = eps;
    return p;
  }
};

inline void validate(const DriverConfig& c) {
  if (!(c.eps > 0 && c.eps < 1)) throw InvalidArgument("eps must lie in (0,1)");
  if (c.k <= 0) throw InvalidArgument("k must be positive");
  if (c.s < 2 || (c.mode == Mode::theory && c.s < 4)) throw InvalidArgument("s too small");
  if (c.q0 < 0 || c.q0_factor <= 0) throw InvalidArgument("q0 must be positive");
  if (c.n_trials < 1) throw InvalidArgument("n_trials must be at least 1");
  if (c.base_case_size < 0 || c.L < 0) throw InvalidArgument("negative size");
}

// Analysis-level parameters with unit constants. They are reported, and in
// theory mode s and q0 are used; the caps stay practical because the
// verbatim bounds cannot be enumerated.
struct TheoryParams {
  int s = 4;
  double q0 = 0;
  double m = 0;  // portals per cluster
  double r = 0;  // active portals per cluster
};

inline TheoryParams theory_params(int n, int L, const DriverConfig& c) {
  TheoryParams t;
  const double logn = std::max(2.0, std::log2(static_cast<double>(std::max(n, 2))));
  t.s = std::max(4, static_cast<int>(std::ceil(std::pow(logn, 1.0 / c.k))));
  t.q0 = std::pow(t.s * c.k / c.eps, c.k);
  t.m = std::pow(t.s * c.k * std::max(L, 1) / c.eps, c.k);
  t.r = std::pow(2.0, c.k) * t.q0 * std::max(1.0, std::log(logn) / std::log(static_cast<double>(t.s)));
  return t;
}

struct HeuristicValue {
  int i = 0;
  PointId u = 0;
  double t = 4.0;
  Dist value = 0;
};

// Weight of net-respecting GW on the auxiliary sub-instance around u.
inline HeuristicValue heuristic_T(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst, int i,
                                  PointId u, double t, const DriverConfig& c) {
  HeuristicValue hv{i, u, t, 0};
  const auto sub = auxiliary_subinstance(m, h, inst, AuxParams{i, u, t, c.delta()});
  if (sub.empty()) return hv;
  hv.value = weight(make_net_respecting(gw_primal_dual(m, sub), m, h, c.eps), m);
  return hv;
}

// Heights at which the bridging net N_j of the auxiliary sub-instance
// exists (delta s^i > 1).
inline std::vector<int> scan_heights(const NetHierarchy& h, const DriverConfig& c) {
  std::vector<int> out;
  for (int i = 0; i < h.L; ++i)
    if (c.delta() * std::pow(static_cast<double>(h.s), i) > 1.0) out.push_back(i);
  return out;
}

inline std::vector<HeuristicValue> heuristic_table(const MetricSpace& m, const NetHierarchy& h,
                                                   const SfpInstance& inst, const DriverConfig& c) {
  std::vector<HeuristicValue> out;
  for (int i : scan_heights(h, c))
    for (PointId u : h.net(i)) out.push_back(heuristic_T(m, h, inst, i, u, 4.0, c));
  return out;
}

// q0 = factor * median of H/s^i over positive values; +inf when none.
inline double calibrate_q0(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst,
                           const DriverConfig& c) {
  std::vector<double> ratios;
  for (const auto& hv : heuristic_table(m, h, inst, c))
    if (hv.value > 0) ratios.push_back(static_cast<double>(hv.value) / static_cast<double>(m.scale_pow(h.s, hv.i)));
  if (ratios.empty()) return std::numeric_limits<double>::infinity();
  std::sort(ratios.begin(), ratios.end());
  const std::size_t mid = ratios.size() / 2;
  const double med = ratios.size() % 2 ? ratios[mid] : 0.5 * (ratios[mid - 1] + ratios[mid]);
  return c.q0_factor * med;
}

// Smallest critical height and its maximizing net point (ties by id).
inline std::optional<HeuristicValue> sparsity_scan(const MetricSpace& m, const NetHierarchy& h,
                                                   const SfpInstance& inst, double q0, const DriverConfig& c) {
  if (inst.empty() || std::isinf(q0)) return std::nullopt;
  for (int i : scan_heights(h, c)) {
    std::optional<HeuristicValue> best;
    for (PointId u : h.net(i)) {
      auto hv = heuristic_T(m, h, inst, i, u, 4.0, c);
      if (!best || hv.value > best->value) best = hv;
    }
    const long double threshold = static_cast<long double>(q0) * m.scale_pow(h.s, i);
    if (best && static_cast<long double>(best->value) > threshold) return best;
  }
  return std::nullopt;
}

// Smallest lambda in [0, ceil(k)) with T(lambda+1) <= 30k T(lambda), where
// T(lambda) is the heuristic at radius 4 + 2 lambda; otherwise the lambda
// with the smallest ratio.
inline int choose_lambda(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst, int i, PointId u,
                         const DriverConfig& c) {
  const int kmax = std::max(1, static_cast<int>(std::ceil(c.k)));
  std::vector<Dist> T;
  for (int l = 0; l <= kmax; ++l) T.push_back(heuristic_T(m, h, inst, i, u, 4.0 + 2.0 * l, c).value);
  int best = 0;
  long double best_ratio = std::numeric_limits<long double>::infinity();
  for (int l = 0; l < kmax; ++l) {
    if (static_cast<long double>(T[l + 1]) <= 30.0L * c.k * static_cast<long double>(T[l])) return l;
    const long double ratio = T[l] > 0 ? static_cast<long double>(T[l + 1]) / T[l] : std::numeric_limits<long double>::infinity();
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = l;
    }
  }
  return best;
}

struct TrialRecord {
  int node = 0;
  int trial = 0;
  Dist value = kInf;  // DP value, kInf when the final entry stayed infinite
  CapCounters caps;
  std::size_t entries = 0;
  std::size_t tuples = 0;
  std::size_t partitions = 0;
  std::size_t verify_failures = 0;
  double ms = 0;
  std::vector<double> ms_per_height;
  bool reused = false;  // same decomposition as an earlier trial of this node
};

struct NodeRecord {
  int id = 0;
  int depth = 0;
  std::size_t pairs = 0;
  std::string kind;  // base, sparse, critical
  int i = -1;
  PointId u = -1;
  int lambda = -1;
  double h = 0;
};

struct AlgStats {
  int recursion_nodes = 0;
  int max_depth = 0;
  int dp_runs = 0;
  int dp_infinite = 0;
  bool fallback_used = false;  // some sparse node fell back to GW
  bool depth_capped = false;
  CapCounters caps;
  std::vector<NodeRecord> nodes;
  std::vector<TrialRecord> trials;
};

namespace detail {

inline std::mt19937_64 substream(std::uint64_t seed, int node, int trial, int purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(node), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

inline void trace(const DriverConfig& c, const std::string& s) {
  if (c.log) c.log(s);
}

}  // namespace detail

// Best of n_trials DP runs, each on a freshly sampled decomposition. Falls
// back to GW when no trial reaches a finite final value.
inline Forest solve_sparse(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst,
                           const DriverConfig& c, int node, AlgStats& st) {
  if (inst.empty()) return {};
  const CellParams cp = make_cell_params(c.eps, c.k, h.s, h.L);
  std::optional<Forest> best;
  Dist best_w = kInf;
  // The DP is deterministic given the decomposition, so repeated samples
  // reuse the earlier outcome.
  std::map<std::vector<int>, TrialRecord> seen;
  for (int t = 0; t < c.n_trials; ++t) {
    auto rng = detail::substream(c.seed, node, t, 0);
    const auto d = build_hierarchy_decomposition(m, h, rng, c.decomposition());
    std::vector<int> sig;
    for (const auto& cl : d.clusters) {
      sig.insert(sig.end(), {cl.height, cl.center, cl.parent, -1});
      sig.insert(sig.end(), cl.points.begin(), cl.points.end());
      sig.push_back(-2);
      sig.insert(sig.end(), cl.portals.begin(), cl.portals.end());
      sig.push_back(-3);
    }
    if (auto it = seen.find(sig); it != seen.end()) {
      TrialRecord rec = it->second;
      rec.trial = t;
      rec.reused = true;
      rec.ms = 0;
      rec.ms_per_height.assign(rec.ms_per_height.size(), 0.0);
      st.trials.push_back(rec);
      continue;
    }
    DpContext ctx(m, d, inst, c.caps, cp);
    const auto t0 = std::chrono::steady_clock::now();
    auto dp = run_dp(ctx);
    TrialRecord rec;
    rec.node = node;
    rec.trial = t;
    rec.value = dp.value;
    rec.caps = dp.stats.caps;
    for (auto e : dp.stats.entries) rec.entries += e;
    rec.tuples = dp.stats.tuples;
    rec.partitions = dp.stats.partitions;
    rec.verify_failures = dp.stats.verify_failures;
    rec.ms_per_height = dp.stats.ms_per_height;
    rec.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    st.trials.push_back(rec);
    seen.emplace(std::move(sig), rec);
    st.caps.add(dp.stats.caps);
    ++st.dp_runs;
    if (dp.value >= kInf) {
      ++st.dp_infinite;
      if (c.on_trial) c.on_trial(m, d, inst, nullptr);
      continue;
    }
    Forest f = extract_solution(ctx, dp);
    if (c.on_trial) c.on_trial(m, d, inst, &f);
    if (!is_feasible(f, inst, static_cast<std::size_t>(m.size()))) throw Infeasible("extracted DP forest is infeasible");
    if (dp.value < best_w) {
      best_w = dp.value;
      best = std::move(f);
    }
  }
  if (best) return *best;
  st.fallback_used = true;
  detail::trace(c, "node " + std::to_string(node) + ": every DP trial infinite, using GW");
  return gw_primal_dual(m, inst);
}

namespace detail {

inline Forest alg_rec(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst, const DriverConfig& c,
                      double q0, int depth, AlgStats& st) {
  NodeRecord node;
  node.id = st.recursion_nodes++;
  node.depth = depth;
  node.pairs = inst.size();
  st.max_depth = std::max(st.max_depth, depth);
  const std::size_t slot = st.nodes.size();
  st.nodes.push_back(node);
  auto finish = [&](const char* kind) { st.nodes[slot].kind = kind; };

  if (inst.empty()) {
    finish("base");
    return {};
  }
  if (static_cast<int>(inst.size()) <= c.base_case_size) {
    finish("base");
    try {
      return brute_force_opt(m, inst, default_candidates(m, inst.terminals()));
    } catch (const BudgetExceeded&) {
      return gw_primal_dual(m, inst);
    }
  }
  if (depth >= m.size() * h.L) {
    st.depth_capped = true;
    finish("sparse");
    return solve_sparse(m, h, inst, c, node.id, st);
  }
  const auto crit = sparsity_scan(m, h, inst, q0, c);
  if (!crit) {
    finish("sparse");
    return solve_sparse(m, h, inst, c, node.id, st);
  }
  const int lambda = choose_lambda(m, h, inst, crit->i, crit->u, c);
  auto rng = substream(c.seed, node.id, 0, 1);
  const double hh = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  auto split = split_critical(m, h, inst, crit->i, crit->u, lambda, hh, c.delta());
  if (split.i2.pairs == inst.pairs) {  // no progress
    finish("sparse");
    return solve_sparse(m, h, inst, c, node.id, st);
  }
  finish("critical");
  st.nodes[slot].i = crit->i;
  st.nodes[slot].u = crit->u;
  st.nodes[slot].lambda = lambda;
  st.nodes[slot].h = hh;
  trace(c, "node " + std::to_string(node.id) + ": critical at i=" + std::to_string(crit->i) + " u=" +
               std::to_string(crit->u) + " lambda=" + std::to_string(lambda) + ", |I1|=" +
               std::to_string(split.i1.size()) + " |I2|=" + std::to_string(split.i2.size()));
  Forest f = solve_sparse(m, h, split.i1, c, node.id, st);
  f.add(alg_rec(m, h, split.i2, c, q0, depth + 1, st));
  if (!is_feasible(f, inst, static_cast<std::size_t>(m.size()))) throw Infeasible("union of sub-solutions is infeasible");
  return f;
}

}  // namespace detail

struct AlgResult {
  Forest forest;  // original point ids
  Dist cost = 0;
  bool feasible = true;
  int L = 0;
  int s = 4;
  double q0 = 0;
  std::optional<TheoryParams> theory;
  Dist gw_cost = 0;
  AlgStats stats;
};

inline AlgResult run_alg(const MetricSpace& m, const SfpInstance& input, DriverConfig c) {
  validate(c);
  AlgResult res;
  const SfpInstance inst = normalized(input.pairs);
  if (inst.empty()) return res;
  res.gw_cost = weight(gw_primal_dual(m, inst), m);
  RescaleResult r;
  try {
    r = rescale_instance(m, inst.pairs, c.eps);
  } catch (const DegenerateInstance&) {
    return res;
  }
  if (c.mode == Mode::theory) {
    res.theory = theory_params(m.size(), std::max(height_count(r.metric, c.s), 2), c);
    c.s = res.theory->s;
    if (c.q0 == 0) c.q0 = res.theory->q0;
  }
  res.s = c.s;
  res.L = c.L > 0 ? c.L : std::max(height_count(r.metric, c.s), 2);
  const auto h = build_hierarchy(r.metric, c.s, res.L);
  const SfpInstance rinst = normalized(r.pairs);
  res.q0 = c.q0 > 0 ? c.q0 : calibrate_q0(r.metric, h, rinst, c);
  Forest f = detail::alg_rec(r.metric, h, rinst, c, res.q0, 0, res.stats);
  res.forest = lift_forest(f, r, inst.pairs);
  res.cost = weight(res.forest, m);
  res.feasible = is_feasible(res.forest, inst, static_cast<std::size_t>(m.size()));
  return res;
}

}  // namespace sfp
