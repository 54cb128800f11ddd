#pragma once

#include "sfp/metric.hpp"

#include <boost/pending/disjoint_sets.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

namespace sfp {

using Edge = std::pair<PointId, PointId>;

inline Edge make_edge(PointId a, PointId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Edge set over points; isolated vertices are not represented.
class Forest {
 public:
  Forest() = default;
  explicit Forest(const std::vector<Edge>& es) {
    for (auto [a, b] : es) add(a, b);
  }

  void add(PointId a, PointId b) {
    if (a != b) edges_.insert(make_edge(a, b));
  }
  void add(const Forest& o) { edges_.insert(o.edges_.begin(), o.edges_.end()); }
  bool erase(const Edge& e) { return edges_.erase(e) > 0; }
  bool contains(PointId a, PointId b) const { return edges_.count(make_edge(a, b)) > 0; }

  const std::set<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }
  bool empty() const { return edges_.empty(); }

  std::vector<PointId> vertices() const {
    std::set<PointId> v;
    for (auto [a, b] : edges_) {
      v.insert(a);
      v.insert(b);
    }
    return {v.begin(), v.end()};
  }

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  std::set<Edge> edges_;
};

inline Dist weight(const Forest& f, const MetricSpace& m) {
  Dist w = 0;
  for (auto [a, b] : f.edges()) w += m.dist(a, b);
  return w;
}

// Union-find over point ids.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : rank_(n), parent_(n), sets_(rank_.data(), parent_.data()) {
    for (std::size_t i = 0; i < n; ++i) sets_.make_set(static_cast<int>(i));
  }
  int find(int x) { return sets_.find_set(x); }
  bool unite(int a, int b) {
    int ra = find(a), rb = find(b);
    if (ra == rb) return false;
    sets_.link(ra, rb);
    return true;
  }
  bool same(int a, int b) { return find(a) == find(b); }

 private:
  std::vector<int> rank_;
  std::vector<int> parent_;
  boost::disjoint_sets<int*, int*> sets_;
};

inline UnionFind connectivity(const Forest& f, std::size_t n) {
  UnionFind uf(n);
  for (auto [a, b] : f.edges()) uf.unite(a, b);
  return uf;
}

struct Component {
  int id = 0;
  std::vector<PointId> vertices;  // sorted
  Dist weight = 0;
};

// Components ordered by smallest vertex; ids are positions in that order.
inline std::vector<Component> components(const Forest& f, const MetricSpace& m) {
  const auto n = static_cast<std::size_t>(m.size());
  UnionFind uf = connectivity(f, n);
  std::map<int, std::size_t> idx;
  std::vector<Component> out;
  for (PointId v : f.vertices()) {
    int r = uf.find(v);
    auto it = idx.find(r);
    if (it == idx.end()) {
      it = idx.emplace(r, out.size()).first;
      out.push_back({});
    }
    out[it->second].vertices.push_back(v);
  }
  for (auto [a, b] : f.edges()) out[idx[uf.find(a)]].weight += m.dist(a, b);
  std::sort(out.begin(), out.end(),
            [](const Component& x, const Component& y) { return x.vertices[0] < y.vertices[0]; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
  return out;
}

inline std::vector<Component> crossing_components(const Forest& f, const MetricSpace& m,
                                                  const PointSet& cluster) {
  std::vector<Component> out;
  for (auto& c : components(f, m)) {
    bool in = false, out_side = false;
    for (PointId v : c.vertices) (cluster.test(v) ? in : out_side) = true;
    if (in && out_side) out.push_back(std::move(c));
  }
  return out;
}

// Largest i with unit*s^i <= e_nr*d, or -1 when e_nr*d < unit.
inline int net_scale(const MetricSpace& m, int s, double e_nr, Dist d) {
  const long double target = static_cast<long double>(e_nr) * static_cast<long double>(d);
  if (static_cast<long double>(m.unit()) > target) return -1;
  int i = 0;
  while (static_cast<long double>(m.scale_pow(s, i + 1)) <= target && m.scale_pow(s, i + 1) < kInf) ++i;
  return i;
}

inline bool is_net_respecting_edge(const MetricSpace& m, const NetHierarchy& h, double e_nr,
                                   PointId x, PointId y) {
  int i = net_scale(m, h.s, e_nr, m.dist(x, y));
  return i <= 0 || (h.in_net(i, x) && h.in_net(i, y));
}

inline bool is_net_respecting(const Forest& f, const MetricSpace& m, const NetHierarchy& h,
                              double e_nr) {
  for (auto [x, y] : f.edges())
    if (!is_net_respecting_edge(m, h, e_nr, x, y)) return false;
  return true;
}

namespace detail {
inline void route_net(const MetricSpace& m, const NetHierarchy& h, double e_nr, PointId x, PointId y,
                      int depth, Forest& out) {
  if (x == y) return;
  int i = net_scale(m, h.s, e_nr, m.dist(x, y));
  if (i <= 0 || (h.in_net(i, x) && h.in_net(i, y)) || depth >= h.L) {
    out.add(x, y);
    return;
  }
  const auto& net = h.net(i);
  PointId xp = m.nearest(x, net);
  PointId yp = m.nearest(y, net);
  route_net(m, h, e_nr, x, xp, depth + 1, out);
  route_net(m, h, e_nr, xp, yp, depth + 1, out);
  route_net(m, h, e_nr, yp, y, depth + 1, out);
}
}  // namespace detail

// Each edge x-y not meeting its net condition is routed x -> x' -> y' -> y
// through the nearest net points at the edge's scale, recursively.
inline Forest make_net_respecting(const Forest& f, const MetricSpace& m, const NetHierarchy& h,
                                  double e_nr) {
  if (e_nr <= 0) throw InvalidArgument("e_nr must be positive");
  Forest out;
  for (auto [x, y] : f.edges()) detail::route_net(m, h, e_nr, x, y, 0, out);
  return out;
}

// Maximal-weight path whose internal vertices are degree-2 non-terminals.
inline std::optional<std::vector<PointId>> find_longest_steiner_chain(const Forest& f,
                                                                      const MetricSpace& m,
                                                                      const PointSet& terminals) {
  if (f.empty()) return std::nullopt;
  const auto verts = f.vertices();
  if (f.size() + 1 != verts.size()) throw NotATree();
  UnionFind uf = connectivity(f, static_cast<std::size_t>(m.size()));
  for (PointId v : verts)
    if (!uf.same(v, verts[0])) throw NotATree();

  std::map<PointId, std::vector<PointId>> adj;
  for (auto [a, b] : f.edges()) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  auto is_stop = [&](PointId v) {
    return (static_cast<std::size_t>(v) < terminals.size() && terminals.test(v)) || adj[v].size() != 2;
  };

  std::optional<std::vector<PointId>> best;
  Dist best_w = -1;
  Edge best_key{};
  for (PointId v : verts) {
    if (!is_stop(v)) continue;
    for (PointId nb : adj[v]) {
      std::vector<PointId> path{v};
      Dist w = 0;
      PointId prev = v, cur = nb;
      while (true) {
        w += m.dist(prev, cur);
        path.push_back(cur);
        if (is_stop(cur)) break;
        PointId nxt = adj[cur][0] == prev ? adj[cur][1] : adj[cur][0];
        prev = cur;
        cur = nxt;
      }
      if (path.front() > path.back()) continue;  // each chain once, from its smaller end
      Edge key{path.front(), path.back()};
      if (w > best_w || (w == best_w && key < best_key)) {
        best_w = w;
        best_key = key;
        best = path;
      }
    }
  }
  return best;
}

// Result of the exact Steiner tree oracle. Only the oracle can certify it.
class OptimalSteinerTree {
 public:
  OptimalSteinerTree() = default;
  OptimalSteinerTree(Forest tree, std::vector<PointId> terminals)
      : tree_(std::move(tree)), terminals_(std::move(terminals)) {}

  const Forest& tree() const { return tree_; }
  const std::vector<PointId>& terminals() const { return terminals_; }
  bool certified() const { return certified_; }

 private:
  friend struct OracleAccess;
  Forest tree_;
  std::vector<PointId> terminals_;
  bool certified_ = false;
};

// Every Steiner point of an optimal tree lies within 4 k gamma log2(4/gamma) D
// of the terminals, D = Diam(terminals), longest edge <= gamma D.
inline bool steiner_proximity_check(const MetricSpace& m, const OptimalSteinerTree& t, double gamma,
                                    double k) {
  if (!t.certified()) throw PreconditionUnverifiable("tree was not produced by the exact oracle");
  if (gamma <= 0 || gamma > 1) throw InvalidArgument("gamma must lie in (0,1]");
  const Dist D = m.diameter(t.terminals());
  Dist longest = 0;
  for (auto [a, b] : t.tree().edges()) longest = std::max(longest, m.dist(a, b));
  if (static_cast<long double>(longest) > static_cast<long double>(gamma) * D * (1 + 1e-12L))
    throw InvalidArgument("longest edge exceeds gamma * D");
  const long double bound = 4.0L * k * gamma * std::log2(4.0L / gamma) * D;
  for (PointId r : t.tree().vertices()) {
    if (std::find(t.terminals().begin(), t.terminals().end(), r) != t.terminals().end()) continue;
    if (static_cast<long double>(m.dist_to(r, t.terminals())) > bound) return false;
  }
  return true;
}

// Maps a forest on a rescaled metric back to original ids and reconnects
// every original terminal to the net point it was snapped to.
inline Forest lift_forest(const Forest& f, const RescaleResult& r,
                          const std::vector<TerminalPair>& original_pairs) {
  Forest out;
  for (auto [a, b] : f.edges()) out.add(r.to_original[a], r.to_original[b]);
  for (const auto& p : original_pairs) {
    if (p.a == p.b) continue;
    for (PointId t : {p.a, p.b}) out.add(t, r.to_original[r.snap[t]]);
  }
  return out;
}

}  // namespace sfp
