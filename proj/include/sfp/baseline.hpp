#pragma once

#include "sfp/instance.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <tuple>
#include <vector>

namespace sfp {

struct OracleBudget {
  int max_terminals = 12;
  int max_candidate_steiner = 24;
  int time_cap_ms = 60'000;
};

struct OracleAccess {
  static OptimalSteinerTree certify(Forest f, std::vector<PointId> terminals) {
    OptimalSteinerTree t(std::move(f), std::move(terminals));
    t.certified_ = true;
    return t;
  }
};

// Kruskal over the complete graph; ties by (weight, smaller id, larger id).
inline Forest mst(const MetricSpace& m, std::vector<PointId> points) {
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  std::vector<std::tuple<Dist, PointId, PointId>> es;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = i + 1; j < points.size(); ++j)
      es.emplace_back(m.dist(points[i], points[j]), points[i], points[j]);
  std::sort(es.begin(), es.end());
  UnionFind uf(static_cast<std::size_t>(m.size()));
  Forest f;
  for (auto [w, a, b] : es)
    if (uf.unite(a, b)) f.add(a, b);
  return f;
}

// Synchronized dual growth over terminal points followed by reverse deletion.
inline Forest gw_primal_dual(const MetricSpace& m, const SfpInstance& inst) {
  const SfpInstance ins = normalized(inst.pairs);
  const auto verts = ins.terminals();
  const std::size_t k = verts.size();
  if (k == 0) return {};
  std::map<PointId, std::size_t> pos;
  for (std::size_t i = 0; i < k; ++i) pos[verts[i]] = i;

  std::vector<std::size_t> comp(k);
  for (std::size_t i = 0; i < k; ++i) comp[i] = i;
  auto active = [&](std::size_t c) {
    for (const auto& p : ins.pairs) {
      bool ia = comp[pos[p.a]] == c, ib = comp[pos[p.b]] == c;
      if (ia != ib) return true;
    }
    return false;
  };

  std::vector<long double> load(k, 0.0L);
  std::vector<Edge> added;
  while (true) {
    std::vector<char> act(k, 0);
    bool any = false;
    for (std::size_t c = 0; c < k; ++c) {
      act[c] = active(c);
      any = any || act[c];
    }
    if (!any) break;
    long double best_t = 0;
    std::size_t bu = k, bv = k;
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t v = u + 1; v < k; ++v) {
        if (comp[u] == comp[v]) continue;
        int rate = act[comp[u]] + act[comp[v]];
        if (rate == 0) continue;
        long double t = (static_cast<long double>(m.dist(verts[u], verts[v])) - load[u] - load[v]) / rate;
        if (t < 0) t = 0;
        if (bu == k || t < best_t) {
          best_t = t;
          bu = u;
          bv = v;
        }
      }
    for (std::size_t v = 0; v < k; ++v)
      if (act[comp[v]]) load[v] += best_t;
    added.push_back(make_edge(verts[bu], verts[bv]));
    std::size_t from = comp[bv], to = comp[bu];
    for (auto& c : comp)
      if (c == from) c = to;
  }

  Forest f(added);
  for (auto it = added.rbegin(); it != added.rend(); ++it) {
    f.erase(*it);
    if (!is_feasible(f, ins, static_cast<std::size_t>(m.size()))) f.add(it->first, it->second);
  }
  return f;
}

namespace detail {

class Deadline {
 public:
  explicit Deadline(int ms) : end_(std::chrono::steady_clock::now() + std::chrono::milliseconds(ms)) {}
  void check() const {
    if (std::chrono::steady_clock::now() > end_) throw BudgetExceeded("oracle time cap reached");
  }

 private:
  std::chrono::steady_clock::time_point end_;
};

// Dreyfus-Wagner over the complete metric graph on terminals plus candidates.
// Gives the optimal Steiner tree for every subset of the terminals.
class DreyfusWagner {
 public:
  DreyfusWagner(const MetricSpace& m, std::vector<PointId> terminals, std::vector<PointId> candidates,
                const Deadline& deadline)
      : m_(m), term_(std::move(terminals)) {
    verts_ = term_;
    for (PointId c : candidates)
      if (std::find(verts_.begin(), verts_.end(), c) == verts_.end()) verts_.push_back(c);
    const std::size_t t = term_.size(), n = verts_.size(), full = std::size_t{1} << t;
    dp_.assign(full, std::vector<Dist>(n, kInf));
    via_.assign(full, std::vector<int>(n, -1));
    split_.assign(full, std::vector<std::size_t>(n, 0));
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t v = 0; v < n; ++v) dp_[std::size_t{1} << i][v] = d(i, v);
    std::vector<Dist> f(n);
    std::vector<std::size_t> fs(n);
    for (std::size_t S = 1; S < full; ++S) {
      if ((S & (S - 1)) == 0) continue;
      deadline.check();
      for (std::size_t u = 0; u < n; ++u) {
        f[u] = kInf;
        for (std::size_t A = (S - 1) & S; A > 0; A = (A - 1) & S) {
          if (A < (S ^ A)) continue;  // each split once
          Dist c = dp_[A][u] + dp_[S ^ A][u];
          if (c < f[u]) {
            f[u] = c;
            fs[u] = A;
          }
        }
      }
      for (std::size_t v = 0; v < n; ++v)
        for (std::size_t u = 0; u < n; ++u) {
          Dist c = f[u] + m_.dist(verts_[u], verts_[v]);
          if (c < dp_[S][v]) {
            dp_[S][v] = c;
            via_[S][v] = static_cast<int>(u);
            split_[S][v] = fs[u];
          }
        }
    }
  }

  // Optimal Steiner tree cost for the terminal subset given as a bitmask.
  Dist cost(std::size_t S) const {
    if ((S & (S - 1)) == 0) return 0;
    std::size_t t0 = lowest(S);
    return dp_[S ^ (std::size_t{1} << t0)][t0];
  }

  Forest tree(std::size_t S) const {
    Forest f;
    if ((S & (S - 1)) == 0) return f;
    std::size_t t0 = lowest(S);
    build(S ^ (std::size_t{1} << t0), t0, f);
    return f;
  }

 private:
  static std::size_t lowest(std::size_t S) {
    std::size_t i = 0;
    while (!(S >> i & 1)) ++i;
    return i;
  }
  Dist d(std::size_t ti, std::size_t v) const { return m_.dist(term_[ti], verts_[v]); }

  void build(std::size_t S, std::size_t v, Forest& f) const {
    if ((S & (S - 1)) == 0) {
      f.add(term_[lowest(S)], verts_[v]);
      return;
    }
    std::size_t u = static_cast<std::size_t>(via_[S][v]);
    f.add(verts_[v], verts_[u]);
    std::size_t A = split_[S][v];
    build(A, u, f);
    build(S ^ A, u, f);
  }

  const MetricSpace& m_;
  std::vector<PointId> term_;
  std::vector<PointId> verts_;
  std::vector<std::vector<Dist>> dp_;
  std::vector<std::vector<int>> via_;
  std::vector<std::vector<std::size_t>> split_;
};

// Calls fn(labels) for every set partition of {0..n-1} as a restricted
// growth string.
template <class Fn>
void for_each_set_partition(std::size_t n, Fn&& fn) {
  if (n == 0) {
    std::vector<int> empty;
    fn(empty);
    return;
  }
  std::vector<int> a(n, 0), mx(n, 0);
  while (true) {
    fn(a);
    std::size_t i = n - 1;
    while (i > 0 && a[i] > mx[i - 1]) --i;
    if (i == 0) return;
    ++a[i];
    for (std::size_t j = i + 1; j < n; ++j) a[j] = 0;
    for (std::size_t j = i; j < n; ++j) mx[j] = std::max(mx[j - 1], a[j]);
  }
}

inline std::vector<Edge> serialized(const Forest& f) { return {f.edges().begin(), f.edges().end()}; }

}  // namespace detail

// Steiner point candidates: every non-terminal when |X| <= 16, else the
// non-terminals within Diam(terminals) of some terminal.
inline std::vector<PointId> default_candidates(const MetricSpace& m, const std::vector<PointId>& terminals) {
  std::vector<PointId> out;
  const Dist diam = m.diameter(terminals);
  for (PointId p = 0; p < m.size(); ++p) {
    if (std::find(terminals.begin(), terminals.end(), p) != terminals.end()) continue;
    if (m.size() <= 16 || m.dist_to(p, terminals) <= diam) out.push_back(p);
  }
  return out;
}

// Exact minimum Steiner forest over terminals plus any subset of candidates.
inline Forest brute_force_opt(const MetricSpace& m, const SfpInstance& inst,
                              const std::vector<PointId>& candidates, const OracleBudget& budget = {}) {
  const SfpInstance ins = normalized(inst.pairs);
  const auto term = ins.terminals();
  if (term.empty()) return {};
  if (static_cast<int>(term.size()) > budget.max_terminals)
    throw BudgetExceeded("too many terminals for the oracle");
  std::vector<PointId> cand;
  for (PointId c : candidates)
    if (std::find(term.begin(), term.end(), c) == term.end()) cand.push_back(c);
  if (static_cast<int>(cand.size()) > budget.max_candidate_steiner)
    throw BudgetExceeded("too many candidate Steiner points for the oracle");

  detail::Deadline deadline(budget.time_cap_ms);
  detail::DreyfusWagner dw(m, term, cand, deadline);

  // Terminals tied by pairs must share a group.
  std::map<PointId, std::size_t> idx;
  for (std::size_t i = 0; i < term.size(); ++i) idx[term[i]] = i;
  UnionFind uf(term.size());
  for (const auto& p : ins.pairs) uf.unite(static_cast<int>(idx[p.a]), static_cast<int>(idx[p.b]));
  std::map<int, std::size_t> mask_of;
  for (std::size_t i = 0; i < term.size(); ++i) mask_of[uf.find(static_cast<int>(i))] |= std::size_t{1} << i;
  std::vector<std::size_t> blocks;
  for (auto& [r, mk] : mask_of) blocks.push_back(mk);

  Dist best = kInf;
  std::vector<std::size_t> best_groups;
  Forest best_forest;
  detail::for_each_set_partition(blocks.size(), [&](const std::vector<int>& lab) {
    int g = 0;
    for (int l : lab) g = std::max(g, l + 1);
    std::vector<std::size_t> groups(static_cast<std::size_t>(g), 0);
    for (std::size_t b = 0; b < blocks.size(); ++b) groups[lab[b]] |= blocks[b];
    Dist c = 0;
    for (auto gm : groups) c += dw.cost(gm);
    if (c > best) return;
    Forest f;
    for (auto gm : groups) f.add(dw.tree(gm));
    if (c < best || detail::serialized(f) < detail::serialized(best_forest)) {
      best = c;
      best_forest = std::move(f);
    }
  });
  return best_forest;
}

inline OptimalSteinerTree brute_force_steiner_tree(const MetricSpace& m, std::vector<PointId> terminals,
                                                   const std::vector<PointId>& candidates,
                                                   const OracleBudget& budget = {}) {
  std::sort(terminals.begin(), terminals.end());
  terminals.erase(std::unique(terminals.begin(), terminals.end()), terminals.end());
  if (static_cast<int>(terminals.size()) > budget.max_terminals)
    throw BudgetExceeded("too many terminals for the oracle");
  std::vector<PointId> cand;
  for (PointId c : candidates)
    if (std::find(terminals.begin(), terminals.end(), c) == terminals.end()) cand.push_back(c);
  if (static_cast<int>(cand.size()) > budget.max_candidate_steiner)
    throw BudgetExceeded("too many candidate Steiner points for the oracle");
  Forest f;
  if (terminals.size() >= 2) {
    detail::Deadline deadline(budget.time_cap_ms);
    detail::DreyfusWagner dw(m, terminals, cand, deadline);
    f = dw.tree((std::size_t{1} << terminals.size()) - 1);
  }
  return OracleAccess::certify(std::move(f), std::move(terminals));
}

}  // namespace sfp
