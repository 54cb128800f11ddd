#pragma once

// Invariant suites shared by `sfp validate` and the acceptance binary. Each
// suite runs over generated instances and counts checks and failures.

#include "sfp/io.hpp"

#include <functional>
#include <map>

namespace sfp {

struct SuiteOptions {
  std::uint64_t seed = 1;
  int instances = 20;
  int mc_trials = 10'000;  // partitions per (P, i) in the cut suite
  int s = 4;
  double k = 2.0;
  double eps = 0.5;
  double c_cut = DecompositionParams{}.c_cut;
  DpCaps caps = practical_caps();
};

struct SuiteReport {
  std::string name;
  int checked = 0;
  int failures = 0;
  json details = json::object();
  bool passed() const { return checked > 0 && failures == 0; }
};

namespace detail {

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t i) { return seed * 1'000'003ULL + i; }

struct Prepared {
  Generated g;
  RescaleResult r;
  NetHierarchy h;
};

inline Prepared prepare(const GeneratorSpec& spec, const SuiteOptions& o) {
  Prepared p;
  p.g = generate(spec);
  p.r = rescale_instance(p.g.metric, p.g.instance.pairs, o.eps);
  p.h = build_hierarchy(p.r.metric, o.s, std::max(height_count(p.r.metric, o.s), 2));
  return p;
}

// Spanning forest of f by Kruskal over its own edges.
inline Forest spanning_forest(const Forest& f, const MetricSpace& m) {
  std::vector<Edge> es(f.edges().begin(), f.edges().end());
  std::stable_sort(es.begin(), es.end(), [&](Edge a, Edge b) { return m.dist(a.first, a.second) < m.dist(b.first, b.second); });
  UnionFind uf(static_cast<std::size_t>(m.size()));
  Forest out;
  for (auto [a, b] : es)
    if (!uf.same(a, b)) {
      uf.unite(a, b);
      out.add(a, b);
    }
  return out;
}

// Heaviest path whose internal points are degree-2 non-terminals, found by
// walking every simple path from every vertex.
inline Dist exhaustive_chain_weight(const Forest& f, const MetricSpace& m, const PointSet& t) {
  std::map<PointId, std::vector<PointId>> adj;
  for (auto [a, b] : f.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  Dist best = 0;
  std::function<void(PointId, PointId, Dist)> walk = [&](PointId v, PointId par, Dist w) {
    best = std::max(best, w);
    if (par >= 0 && (t.test(static_cast<std::size_t>(v)) || adj[v].size() != 2)) return;
    for (PointId nb : adj[v])
      if (nb != par) walk(nb, v, w + m.dist(v, nb));
  };
  for (auto& [v, _] : adj) walk(v, -1, 0);
  return best;
}

}  // namespace detail

// Nested nets, packing and covering at every height, and the packing
// cardinality bound (2 Diam / rho)^(2 dim) on generated Euclidean inputs.
inline SuiteReport suite_nets(const SuiteOptions& o) {
  SuiteReport rep{"nets"};
  const GeneratorKind kinds[] = {GeneratorKind::euclidean2d, GeneratorKind::euclidean3d, GeneratorKind::grid,
                                 GeneratorKind::clustered};
  for (int t = 0; t < o.instances; ++t)
    for (auto kind : kinds) {
      GeneratorSpec spec{kind, 1 + t % 5, 50.0, detail::mix(o.seed, static_cast<std::uint64_t>(t)), 6};
      if (kind == GeneratorKind::grid) spec.spread = 4;
      const auto g = generate(spec);
      const auto& m = g.metric;
      const auto h = build_hierarchy(m, o.s, height_count(m, o.s));
      for (int i = 1; i <= h.L; ++i) {
        ++rep.checked;
        bool ok = verify_packing_cover(m, h.nets[i], all_points(m), m.scale_pow(o.s, i), 2.0 * g.dim_bound);
        if (i < h.L)
          for (PointId p : h.nets[i + 1]) ok = ok && h.in_net(i, p);
        if (!ok) {
          ++rep.failures;
          rep.details["failed"].push_back({{"kind", to_string(kind)}, {"seed", spec.seed}, {"height", i}});
        }
      }
    }
  return rep;
}

// Monte-Carlo estimate of Pr[P is cut by the height-i single-scale
// partition] against min(1, C_cut k Diam(P)/s^i) + 3 sigma, Diam(P) <= s^i/4.
inline SuiteReport suite_cut_probability(const SuiteOptions& o) {
  SuiteReport rep{"cut-probability"};
  double worst = 0;
  const double chi = std::pow(2.0, o.k);
  for (int t = 0; t < o.instances; ++t) {
    GeneratorSpec spec{GeneratorKind::euclidean2d, 10, 300.0, detail::mix(o.seed, static_cast<std::uint64_t>(t)), 20};
    const auto g = generate(spec);
    const auto& m = g.metric;
    const auto h = build_hierarchy(m, o.s, height_count(m, o.s));
    std::mt19937_64 rng(spec.seed);
    for (int i = 1; i + 1 < h.L; ++i) {
      const Dist si = m.scale_pow(o.s, i);
      // One set per diameter band (s^i/80, s^i/20], (s^i/20, s^i/4], plus a
      // triple within s^i/4.
      std::vector<std::vector<PointId>> sets;
      for (auto [lo, hi] : {std::pair<Dist, Dist>{si / 80, si / 20}, {si / 20, si / 4}}) {
        bool found = false;
        for (PointId a = 0; a < m.size() && !found; ++a)
          for (PointId b = a + 1; b < m.size() && !found; ++b)
            if (m.dist(a, b) > lo && m.dist(a, b) <= hi) {
              sets.push_back({a, b});
              found = true;
            }
      }
      for (PointId a = 0; a < m.size() && sets.size() < 3; ++a) {
        std::vector<PointId> tri{a};
        for (PointId b = 0; b < m.size() && tri.size() < 3; ++b)
          if (b != a && m.diameter(std::vector<PointId>{tri.front(), b}) <= si / 4) {
            tri.push_back(b);
            if (m.diameter(tri) > si / 4) tri.pop_back();
          }
        if (tri.size() == 3) sets.push_back(tri);
      }
      for (const auto& P : sets) {
        int cuts = 0;
        for (int trial = 0; trial < o.mc_trials; ++trial) {
          std::vector<Dist> r;
          for (PointId u : h.net(i)) r.push_back(si + sample_radius(m, o.s, i, u, chi, rng).h);
          cuts += is_cut(build_single_scale(m, h.net(i), r), P);
        }
        const double freq = static_cast<double>(cuts) / o.mc_trials;
        const double b = std::min(1.0, o.c_cut * o.k * static_cast<double>(m.diameter(P)) / static_cast<double>(si));
        const double limit = b + 3 * std::sqrt(b * (1 - b) / o.mc_trials);
        ++rep.checked;
        worst = std::max(worst, b > 0 ? freq / b : 0.0);
        json row{{"seed", spec.seed}, {"i", i}, {"P", P}, {"freq", freq}, {"bound", b}};
        if (freq > limit) {
          ++rep.failures;
          rep.details["failed"].push_back(row);
        }
        rep.details["rows"].push_back(std::move(row));
      }
    }
  }
  rep.details["c_cut"] = o.c_cut;
  rep.details["max_freq_over_bound"] = worst;
  return rep;
}

// Every Steiner point of an exact optimal Steiner tree is near the terminals.
inline SuiteReport suite_near_terminal(const SuiteOptions& o) {
  SuiteReport rep{"near-terminal"};
  double worst_gamma = 0;
  for (int t = 0; t < o.instances; ++t) {
    const int nterm = 2 + t % 5;  // 2..6 terminals
    GeneratorSpec spec{t % 3 == 2 ? GeneratorKind::clustered : GeneratorKind::euclidean2d, 3, 20.0,
                       detail::mix(o.seed, static_cast<std::uint64_t>(t)), 6};
    const auto g = generate(spec);
    std::vector<PointId> terms;
    for (PointId p = 0; p < nterm; ++p) terms.push_back(p);
    std::vector<PointId> cand;
    for (PointId p = nterm; p < g.metric.size(); ++p) cand.push_back(p);
    const auto tree = brute_force_steiner_tree(g.metric, terms, cand);
    const Dist D = g.metric.diameter(tree.terminals());
    if (D == 0 || tree.tree().empty()) continue;
    Dist longest = 0;
    for (auto [a, b] : tree.tree().edges()) longest = std::max(longest, g.metric.dist(a, b));
    const double gamma = std::min(1.0, static_cast<double>(longest) / static_cast<double>(D));
    worst_gamma = std::max(worst_gamma, gamma);
    ++rep.checked;
    if (!steiner_proximity_check(g.metric, tree, gamma, g.dim_bound)) {
      ++rep.failures;
      rep.details["failed"].push_back({{"seed", spec.seed}, {"terminals", nterm}});
    }
  }
  rep.details["max_gamma"] = worst_gamma;
  return rep;
}

// Two well-separated terminal clumps S, T. The exact Steiner tree must carry
// a chain of weight >= tau^2/(4096 k^2) D, and find_longest_steiner_chain must
// agree with path enumeration. The net-respecting variant's ratio is
// recorded, not asserted.
inline SuiteReport suite_long_chain(const SuiteOptions& o) {
  SuiteReport rep{"long-chain"};
  double min_ratio = 1e300, min_ratio_nr = 1e300;
  for (int t = 0; t < o.instances; ++t) {
    std::mt19937_64 rng(detail::mix(o.seed, static_cast<std::uint64_t>(t)));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double sep = 10 + 40 * U(rng);
    std::vector<std::vector<double>> pts;
    const int per = 2 + static_cast<int>(rng() % 2);
    for (int side = 0; side < 2; ++side)
      for (int j = 0; j < per; ++j) pts.push_back({side * sep + 4 * U(rng), 4 * U(rng)});
    for (int j = 0; j < 5; ++j) pts.push_back({sep * U(rng), 4 * U(rng) - 2});
    const auto m = build_metric_from_points(pts);
    std::vector<PointId> S, T, terms, cand;
    for (int j = 0; j < per; ++j) {
      S.push_back(j);
      T.push_back(per + j);
    }
    terms = S;
    terms.insert(terms.end(), T.begin(), T.end());
    for (PointId p = 2 * per; p < m.size(); ++p) cand.push_back(p);
    Dist dst = kInf;
    for (PointId a : S) dst = std::min(dst, m.dist_to(a, T));
    const Dist D = m.diameter(terms);
    const double tau = static_cast<double>(dst) / static_cast<double>(D);
    const double need = tau * tau / (4096.0 * o.k * o.k) * static_cast<double>(D);
    const PointSet tset = from_ids(static_cast<std::size_t>(m.size()), terms);

    const auto tree = brute_force_steiner_tree(m, terms, cand);
    const auto chain = find_longest_steiner_chain(tree.tree(), m, tset);
    Dist w = 0;
    if (chain)
      for (std::size_t j = 1; j < chain->size(); ++j) w += m.dist((*chain)[j - 1], (*chain)[j]);
    rep.checked += 2;
    if (static_cast<double>(w) < need) {
      ++rep.failures;
      rep.details["failed"].push_back({{"index", t}, {"reason", "short chain"}});
    }
    if (w != detail::exhaustive_chain_weight(tree.tree(), m, tset)) {
      ++rep.failures;
      rep.details["failed"].push_back({{"index", t}, {"reason", "chain differs from enumeration"}});
    }
    min_ratio = std::min(min_ratio, static_cast<double>(w) / (tau * tau * static_cast<double>(D)));

    const auto h = build_hierarchy(m, o.s, height_count(m, o.s));
    const Forest nr = detail::spanning_forest(make_net_respecting(tree.tree(), m, h, o.eps), m);
    if (const auto c2 = find_longest_steiner_chain(nr, m, tset)) {
      Dist w2 = 0;
      for (std::size_t j = 1; j < c2->size(); ++j) w2 += m.dist((*c2)[j - 1], (*c2)[j]);
      min_ratio_nr = std::min(min_ratio_nr, static_cast<double>(w2) / (tau * tau * static_cast<double>(D)));
    }
  }
  rep.details["min_chain_over_tau2_D"] = min_ratio;
  rep.details["net_respecting_min_chain_over_tau2_D"] = min_ratio_nr;
  rep.details["asserted_constant"] = 1.0 / (4096.0 * o.k * o.k);
  return rep;
}

// Structural invariants of one (decomposition, forest) pair.
struct StructuralCheck {
  bool refinement = true;    // union of children's Eff refines the parent's Eff
  bool centers = true;       // Eff centers lie in Can(C)
  int eff_over_cap = 0;      // clusters with |Eff| > rho_cap (flagged, not failed)
  bool enforce = true;       // enforce output has no violations, <= comps - 1 edges
  std::size_t added = 0;
  std::size_t eff_cells = 0;  // total |Eff(C)| over all clusters
  bool ok() const { return refinement && centers && enforce; }
};

inline StructuralCheck structural_check(const Forest& f, const MetricSpace& m, const Decomposition& d,
                                        const CellParams& p, const DpCaps& caps) {
  StructuralCheck sc;
  const auto a = compute_cells(f, m, d, p);
  for (const auto& c : d.clusters) {
    if (!c.children.empty()) {
      std::vector<int> s1;
      for (int ch : c.children) s1.insert(s1.end(), a.eff[ch].begin(), a.eff[ch].end());
      sc.refinement = sc.refinement && check_refinement(d, s1, a.eff[c.id]);
    }
    const auto can = candidate_centers(c.id, m, d, p);
    for (int e : a.eff[c.id]) sc.centers = sc.centers && std::binary_search(can.begin(), can.end(), d[e].center);
    sc.eff_over_cap += static_cast<int>(a.eff[c.id].size()) > caps.rho_cap;
    sc.eff_cells += a.eff[c.id].size();
  }
  const auto ncomp = components(f, m).size();
  const auto rep = enforce_cell_property(f, m, d, p);
  sc.added = rep.added.size();
  const auto a2 = compute_cells(rep.forest, m, d, p);
  sc.enforce = check_cell_property(rep.forest, m, d, a2).empty() &&
               check_cell_property(rep.forest, m, d, a2, CellFamily::bas).empty() &&
               (ncomp == 0 ? rep.added.empty() : rep.added.size() <= ncomp - 1);
  return sc;
}

inline SuiteReport suite_refinement(const SuiteOptions& o) {
  SuiteReport rep{"refinement"};
  int flagged = 0;
  for (int t = 0; t < o.instances; ++t) {
    GeneratorSpec spec{GeneratorKind::euclidean2d, 3 + t % 2, 20.0, detail::mix(o.seed, static_cast<std::uint64_t>(t)), 5};
    const auto pr = detail::prepare(spec, o);
    const auto& m = pr.r.metric;
    std::mt19937_64 rng(spec.seed);
    DecompositionParams dp;
    dp.k = o.k;
    const auto d = build_hierarchy_decomposition(m, pr.h, rng, dp);
    const auto cp = make_cell_params(o.eps, o.k, o.s, pr.h.L);
    const auto a = compute_cells(gw_primal_dual(m, SfpInstance{pr.r.pairs}), m, d, cp);
    for (const auto& c : d.clusters) {
      ++rep.checked;
      bool ok = true;
      if (!c.children.empty()) {
        std::vector<int> s1;
        for (int ch : c.children) s1.insert(s1.end(), a.eff[ch].begin(), a.eff[ch].end());
        ok = check_refinement(d, s1, a.eff[c.id]);
      }
      const auto can = candidate_centers(c.id, m, d, cp);
      for (int e : a.eff[c.id]) ok = ok && std::binary_search(can.begin(), can.end(), d[e].center);
      flagged += static_cast<int>(a.eff[c.id].size()) > o.caps.rho_cap;
      if (!ok) {
        ++rep.failures;
        rep.details["failed"].push_back({{"seed", spec.seed}, {"cluster", c.id}});
      }
    }
  }
  rep.details["eff_over_rho_cap"] = flagged;
  return rep;
}

// enforce_cell_property on forests of direct pair edges, then a JSON
// round-trip of the forest and of its cell assignment.
inline SuiteReport suite_cell_property(const SuiteOptions& o) {
  SuiteReport rep{"cell-property"};
  for (int t = 0; t < o.instances; ++t) {
    GeneratorSpec spec{GeneratorKind::euclidean2d, 3 + t % 2, 20.0, detail::mix(o.seed, static_cast<std::uint64_t>(t)), 4};
    const auto pr = detail::prepare(spec, o);
    const auto& m = pr.r.metric;
    std::mt19937_64 rng(spec.seed);
    DecompositionParams dp;
    dp.k = o.k;
    const auto d = build_hierarchy_decomposition(m, pr.h, rng, dp);
    const auto cp = make_cell_params(o.eps, o.k, o.s, pr.h.L);
    Forest f;
    for (auto p : pr.r.pairs) f.add(p.a, p.b);
    const auto sc = structural_check(f, m, d, cp, o.caps);
    const auto rt = forest_from_json(json::parse(forest_to_json(f).dump()), m);
    const bool round_trip = rt == f && cells_to_json(compute_cells(rt, m, d, cp)).dump() ==
                                           cells_to_json(compute_cells(f, m, d, cp)).dump();
    ++rep.checked;
    if (!sc.enforce || !round_trip) {
      ++rep.failures;
      rep.details["failed"].push_back({{"seed", spec.seed}, {"enforce", sc.enforce}, {"round_trip", round_trip}});
    }
  }
  return rep;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"nets",       "cut-probability", "near-terminal",
                                              "long-chain", "refinement",      "cell-property"};
  return names;
}

inline SuiteReport run_suite(const std::string& name, const SuiteOptions& o) {
  if (name == "nets") return suite_nets(o);
  if (name == "cut-probability") return suite_cut_probability(o);
  if (name == "near-terminal") return suite_near_terminal(o);
  if (name == "long-chain") return suite_long_chain(o);
  if (name == "refinement") return suite_refinement(o);
  if (name == "cell-property") return suite_cell_property(o);
  throw InvalidArgument("unknown suite: " + name);
}

}  // namespace sfp
