#pragma once

#include "sfp/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

namespace sfp {

// gamma1 = s^-a1 and gamma0 = s^-a0, stored as exponents so every
// comparison stays exact.
struct CellParams {
  int s = 4;
  int L = 1;
  int a1 = 2;  // 1/gamma1 = floor_s(1/gamma1_hat)
  int a0 = 5;  // 1/gamma0 = ceil_s(1/gamma0_hat)
};

// Exponent of floor_s(x) for x > 0.
inline int floor_log_s(long double x, int s) {
  if (x <= 0) throw InvalidArgument("floor_log_s of a non-positive value");
  int e = 0;
  long double p = 1;
  while (p * s <= x) {
    p *= s;
    ++e;
  }
  while (p > x) {
    p /= s;
    --e;
  }
  return e;
}

inline int ceil_log_s(long double x, int s) {
  int e = floor_log_s(x, s);
  return std::pow(static_cast<long double>(s), e) < x ? e + 1 : e;
}

// gamma1_hat = eps/s^2 and gamma0_hat = eps/(k s^2 L), unit constants.
inline CellParams make_cell_params(double eps, double k, int s, int L) {
  if (eps <= 0 || eps >= 1) throw InvalidArgument("eps must lie in (0,1)");
  CellParams p;
  p.s = s;
  p.L = L;
  const long double s2 = static_cast<long double>(s) * s;
  p.a1 = floor_log_s(s2 / eps, s);
  p.a0 = std::max(ceil_log_s(k * s2 * L / eps, s), p.a1 + 1);
  return p;
}

// Exponent p of floor_s(l) for a scaled weight l: unit * s^p <= l < unit * s^(p+1).
inline int floor_pow_exponent(Dist l, Dist unit, int s) {
  if (l <= 0) throw NonPositiveWeight();
  int p = 0;
  if (l >= unit) {
    __int128 v = unit;
    while (v * s <= l) {
      v *= s;
      ++p;
    }
  } else {
    __int128 v = l;  // find the largest p < 0 with unit <= l * s^-p
    while (v < unit) {
      v *= s;
      --p;
    }
  }
  return p;
}

// h(i, l) = unit * s^e; returns e.
inline int h_exponent(int i, Dist l, Dist unit, const CellParams& p) {
  const int f = floor_pow_exponent(l, unit, p.s);
  if (f >= i) return i - p.a1;
  if (f >= i - (p.a0 - p.a1)) return f - p.a1;
  return i - p.a0;
}

struct ScaledValue {
  __int128 num = 0;
  __int128 den = 1;  // value = num / den, in scaled units
};

inline ScaledValue h_function(int i, Dist l, Dist unit, const CellParams& p) {
  if (i < 0 || i > p.L) throw InvalidArgument("height out of range");
  const int e = h_exponent(i, l, unit, p);
  ScaledValue v{unit, 1};
  for (int j = 0; j < std::abs(e); ++j) (e > 0 ? v.num : v.den) *= p.s;
  return v;
}

// Height of the h(i,l)-cells; heights below 0 collapse to singletons.
inline int cell_height(int i, Dist l, Dist unit, const CellParams& p) {
  return std::clamp(h_exponent(i, l, unit, p), 0, i);
}

struct CellAssignment {
  std::vector<std::vector<int>> bas, pro, vir, nbas, eff;  // per cluster, sorted ids
  std::vector<std::map<int, int>> owner;                    // basic cell -> component id
};

inline std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

struct BasicCells {
  std::vector<int> cells;
  std::map<int, int> owner;
};

// Owner = lightest crossing component, ties by component id.
inline BasicCells basic_cells(int c, const Forest& f, const MetricSpace& m, const Decomposition& d,
                              const CellParams& p) {
  const auto& cl = d[c];
  BasicCells out;
  std::map<int, std::pair<Dist, int>> best;
  for (const auto& a : crossing_components(f, m, cl.members)) {
    const int ch = cell_height(cl.height, a.weight, m.unit(), p);
    for (PointId v : a.vertices) {
      if (!cl.contains(v)) continue;
      const int e = d.cluster_of(ch, v);
      auto key = std::make_pair(a.weight, a.id);
      auto it = best.find(e);
      if (it == best.end() || key < it->second) best[e] = key;
    }
  }
  for (auto& [e, key] : best) {
    out.cells.push_back(e);
    out.owner[e] = key.second;
  }
  return out;
}

// Siblings of e inside its parent; none when e has no parent.
inline std::vector<int> siblings(const Decomposition& d, int e) {
  std::vector<int> out;
  const int par = d[e].parent;
  if (par < 0) return out;
  for (int c : d[par].children)
    if (c != e) out.push_back(c);
  return out;
}

// Pro and Vir from the basic cells of every cluster. Siblings of C itself lie
// outside C and are not considered.
inline std::pair<std::vector<int>, std::vector<int>> promoted_virtual(
    int c, const std::vector<std::vector<int>>& all_bas, const Decomposition& d) {
  const auto& bas = all_bas[c];
  std::set<int> S;
  for (int e : bas) {
    if (e == c) continue;
    for (int sib : siblings(d, e))
      if (!std::binary_search(bas.begin(), bas.end(), sib)) S.insert(sib);
  }
  std::vector<int> pro, vir;
  for (int e : S) {
    int best = -1;
    for (int cp = 0; cp < static_cast<int>(d.clusters.size()); ++cp) {
      if (!d.is_proper_descendant(cp, c)) continue;
      if (!std::binary_search(all_bas[cp].begin(), all_bas[cp].end(), e)) continue;
      if (best < 0 || d[cp].height > d[best].height ||
          (d[cp].height == d[best].height && d[cp].center < d[best].center))
        best = cp;
    }
    if (best < 0) {
      vir.push_back(e);
      continue;
    }
    for (int x : all_bas[best])
      if (d.is_descendant_or_self(x, e)) pro.push_back(x);
  }
  return {sorted_unique(pro), sorted_unique(vir)};
}

// e ∩ C for laminar clusters: e itself, C, or nothing.
inline int laminar_intersection(const Decomposition& d, int e, int c) {
  if (d.is_descendant_or_self(e, c)) return e;
  if (d.is_proper_descendant(c, e)) return c;
  if (d[e].members.intersects(d[c].members)) throw NotLaminar();
  return -1;
}

inline std::vector<int> nonbasic_cells(int c, const std::vector<int>& pro, const std::vector<int>& vir,
                                       const std::vector<int>& parent_nbas, const std::vector<int>& bas,
                                       const Decomposition& d) {
  std::vector<int> in(pro);
  in.insert(in.end(), vir.begin(), vir.end());
  if (d[c].parent >= 0) in.insert(in.end(), parent_nbas.begin(), parent_nbas.end());
  std::vector<int> out;
  for (int e : in) {
    int x = laminar_intersection(d, e, c);
    if (x >= 0 && !std::binary_search(bas.begin(), bas.end(), x)) out.push_back(x);
  }
  return sorted_unique(out);
}

// Full assignment in terms of forest f. Clusters are stored parents before
// children, so one forward pass handles NBas top-down.
inline CellAssignment compute_cells(const Forest& f, const MetricSpace& m, const Decomposition& d,
                                    const CellParams& p) {
  const std::size_t nc = d.clusters.size();
  CellAssignment a;
  a.bas.resize(nc);
  a.pro.resize(nc);
  a.vir.resize(nc);
  a.nbas.resize(nc);
  a.eff.resize(nc);
  a.owner.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    auto b = basic_cells(static_cast<int>(c), f, m, d, p);
    a.bas[c] = std::move(b.cells);
    a.owner[c] = std::move(b.owner);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    auto [pro, vir] = promoted_virtual(static_cast<int>(c), a.bas, d);
    a.pro[c] = std::move(pro);
    a.vir[c] = std::move(vir);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    const int par = d[static_cast<int>(c)].parent;
    static const std::vector<int> none;
    a.nbas[c] = nonbasic_cells(static_cast<int>(c), a.pro[c], a.vir[c], par >= 0 ? a.nbas[par] : none, a.bas[c], d);
    std::vector<int> eff = a.bas[c];
    eff.insert(eff.end(), a.nbas[c].begin(), a.nbas[c].end());
    a.eff[c] = sorted_unique(eff);
  }
  return a;
}

struct DisjointCell {
  int inducer = 0;
  int height = 0;
  PointSet region;
};

// One region per member of S: the cluster minus its strict descendants in S.
inline std::vector<DisjointCell> disjointify(const Decomposition& d, const std::vector<int>& S) {
  for (std::size_t i = 0; i < S.size(); ++i)
    for (std::size_t j = i + 1; j < S.size(); ++j) {
      const auto &x = d[S[i]].members, &y = d[S[j]].members;
      if (!x.intersects(y)) continue;
      const bool nested = d.is_descendant_or_self(S[i], S[j]) || d.is_descendant_or_self(S[j], S[i]);
      if (!nested || !(x.is_subset_of(y) || y.is_subset_of(x))) throw NotLaminar();
    }
  std::vector<DisjointCell> out;
  for (int u : S) {
    DisjointCell c{u, d[u].height, d[u].members};
    for (int e : S)
      if (d.is_proper_descendant(e, u)) c.region -= d[e].members;
    out.push_back(std::move(c));
  }
  return out;
}

// S1 refines S2: every e in S2 is in S1 or has all its children in S1.
inline bool check_refinement(const Decomposition& d, const std::vector<int>& s1, const std::vector<int>& s2) {
  std::set<int> in(s1.begin(), s1.end());
  for (int e : s2) {
    if (in.count(e)) continue;
    for (int ch : d[e].children)
      if (!in.count(ch)) return false;
  }
  return true;
}

struct CellViolation {
  int cluster = 0;
  int inducer = 0;
  int components = 0;
};

enum class CellFamily { bas, eff };

inline std::vector<CellViolation> check_cell_property(const Forest& f, const MetricSpace& m, const Decomposition& d,
                                                      const CellAssignment& a,
                                                      CellFamily which = CellFamily::eff) {
  std::vector<CellViolation> out;
  for (const auto& c : d.clusters) {
    const auto& S = which == CellFamily::eff ? a.eff[c.id] : a.bas[c.id];
    if (S.empty()) continue;
    const auto cross = crossing_components(f, m, c.members);
    if (cross.size() < 2) continue;
    for (const auto& r : disjointify(d, S)) {
      int cnt = 0;
      for (const auto& comp : cross)
        for (PointId v : comp.vertices)
          if (r.region.test(v)) {
            ++cnt;
            break;
          }
      if (cnt >= 2) out.push_back({c.id, r.inducer, cnt});
    }
  }
  return out;
}

struct EnforceReport {
  Forest forest;
  std::vector<Edge> added;
  int passes = 0;
};

// Joins crossing components sharing a basic region, lowest regions first,
// until Bas recomputed on the result has no violation. Every added edge merges
// two components.
inline EnforceReport enforce_cell_property(const Forest& f, const MetricSpace& m, const Decomposition& d,
                                           const CellParams& p) {
  EnforceReport rep{f, {}, 0};
  const auto n = static_cast<std::size_t>(m.size());
  while (true) {
    ++rep.passes;
    bool changed = false;
    const auto bas = compute_cells(rep.forest, m, d, p).bas;
    for (int h = d.L - 1; h >= 0; --h)
      for (int c : d.clusters_at(h)) {
        auto regions = disjointify(d, bas[c]);
        std::stable_sort(regions.begin(), regions.end(),
                         [](const DisjointCell& x, const DisjointCell& y) { return x.height < y.height; });
        for (const auto& r : regions) {
          const auto cross = crossing_components(rep.forest, m, d[c].members);
          std::vector<std::vector<PointId>> hit;
          for (const auto& comp : cross) {
            std::vector<PointId> in;
            for (PointId v : comp.vertices)
              if (r.region.test(v)) in.push_back(v);
            if (!in.empty()) hit.push_back(std::move(in));
          }
          if (hit.size() < 2) continue;
          UnionFind uf = connectivity(rep.forest, n);
          for (std::size_t j = 1; j < hit.size(); ++j) {
            if (uf.same(hit[0].front(), hit[j].front())) continue;
            Edge best{};
            Dist bd = kInf;
            for (PointId x : hit[0])
              for (PointId y : hit[j]) {
                Edge e = make_edge(x, y);
                Dist w = m.dist(x, y);
                if (w < bd || (w == bd && e < best)) {
                  bd = w;
                  best = e;
                }
              }
            rep.forest.add(best.first, best.second);
            rep.added.push_back(best);
            uf.unite(best.first, best.second);
            changed = true;
          }
        }
      }
    if (!changed) break;
  }
  return rep;
}

// Net points of heights max(0, i - 2 a0)..i within 2 s^j of C. Height-0
// clusters are singletons, so at j = 0 only the points of C qualify.
inline std::vector<PointId> candidate_centers(int c, const MetricSpace& m, const Decomposition& d,
                                              const CellParams& p) {
  const auto& cl = d[c];
  std::set<PointId> out(cl.points.begin(), cl.points.end());
  for (int j = std::max(1, cl.height - 2 * p.a0); j <= cl.height; ++j) {
    const Dist r = sat_mul(2, m.scale_pow(d.s, j));
    for (PointId v : d.hierarchy.net(j))
      if (m.dist_to(v, cl.points) <= r) out.insert(v);
  }
  return {out.begin(), out.end()};
}

// Packing bound used as kappa: sum over the candidate heights of
// (16 s^(i-j))^k, since Can(C) at height j sits in a ball of radius 4 s^i.
inline long double kappa_bound(int height, const CellParams& p, double k) {
  long double total = 0;
  for (int j = std::max(0, height - 2 * p.a0); j <= height; ++j)
    total += std::pow(16.0L * std::pow(static_cast<long double>(p.s), height - j), static_cast<long double>(k));
  return total;
}

}  // namespace sfp
