#pragma once

#include "sfp/cells.hpp"
#include "sfp/instance.hpp"

#include <boost/functional/hash.hpp>

#include <chrono>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_map>

namespace sfp {

struct DpCaps {
  int r_cap = 4;      // active portals per entry
  int rho_cap = 8;    // cells per entry
  int edge_cap = 6;   // portal graph edges per cluster
  int max_supernodes = 10;
  std::size_t max_combos = 400'000;  // child-entry combinations per cluster
  std::size_t max_entries = 4'000;   // rows kept per cluster, cheapest first
  bool verify = true;                // re-check every generated tuple
};

// How often each cap cut something off. Any nonzero count means the
// enumeration was not exhaustive and the value may exceed the optimum over
// all entries.
struct CapCounters {
  std::size_t r = 0, rho = 0, edges = 0, supernodes = 0, combos = 0, entries = 0;

  bool any() const { return r || rho || edges || supernodes || combos || entries; }
  void add(const CapCounters& o) {
    r += o.r;
    rho += o.rho;
    edges += o.edges;
    supernodes += o.supernodes;
    combos += o.combos;
    entries += o.entries;
  }
};

// (C, (R, Y), (BAS, NBAS), (g, P)). Y parts are sorted and ordered by their
// smallest portal; g maps each region inducer to Y indices; P partitions the
// Y indices.
struct Entry {
  int cluster = -1;
  std::vector<PointId> R;
  std::vector<std::vector<PointId>> Y;
  std::vector<int> bas, nbas;
  std::map<int, std::vector<int>> g;
  std::vector<std::vector<int>> P;

  std::vector<int> cells() const {
    std::vector<int> c(bas);
    c.insert(c.end(), nbas.begin(), nbas.end());
    return sorted_unique(c);
  }
  friend bool operator==(const Entry&, const Entry&) = default;
};

using EntryKey = std::vector<int>;

struct EntryKeyHash {
  std::size_t operator()(const EntryKey& k) const { return boost::hash_range(k.begin(), k.end()); }
};

inline EntryKey entry_key(const Entry& e) {
  EntryKey k{e.cluster, -1};
  k.insert(k.end(), e.R.begin(), e.R.end());
  k.push_back(-1);
  for (const auto& y : e.Y) {
    k.insert(k.end(), y.begin(), y.end());
    k.push_back(-2);
  }
  k.push_back(-1);
  k.insert(k.end(), e.bas.begin(), e.bas.end());
  k.push_back(-1);
  k.insert(k.end(), e.nbas.begin(), e.nbas.end());
  k.push_back(-1);
  for (const auto& [u, v] : e.g) {
    k.push_back(u);
    k.insert(k.end(), v.begin(), v.end());
    k.push_back(-2);
  }
  k.push_back(-1);
  for (const auto& p : e.P) {
    k.insert(k.end(), p.begin(), p.end());
    k.push_back(-2);
  }
  return k;
}

// Per-point partner lists of the normalized instance.
struct PairIndex {
  std::vector<TerminalPair> pairs;
  std::vector<std::vector<PointId>> partners;

  PairIndex() = default;
  PairIndex(const SfpInstance& inst, int n) : pairs(normalized(inst.pairs).pairs), partners(static_cast<std::size_t>(n)) {
    for (const auto& p : pairs) {
      partners[p.a].push_back(p.b);
      partners[p.b].push_back(p.a);
    }
  }
  bool is_terminal(PointId p) const { return !partners[p].empty(); }
  // Terminal in C with some partner outside C.
  bool isolated_in(PointId p, const PointSet& c) const {
    for (PointId q : partners[p])
      if (!c.test(q)) return true;
    return false;
  }
};

namespace detail {

inline std::vector<std::vector<int>> canonical_partition(std::vector<std::vector<int>> parts) {
  for (auto& p : parts) std::sort(p.begin(), p.end());
  std::erase_if(parts, [](const auto& p) { return p.empty(); });
  std::sort(parts.begin(), parts.end());
  return parts;
}

// Region holding p among nonempty regions, or -1.
inline int region_of(const std::vector<DisjointCell>& regions, PointId p) {
  for (std::size_t r = 0; r < regions.size(); ++r)
    if (regions[r].region.test(static_cast<std::size_t>(p))) return static_cast<int>(r);
  return -1;
}

inline std::vector<int> part_indices(const std::vector<std::vector<PointId>>& Y, const std::vector<PointId>& pts) {
  std::vector<int> out;
  for (std::size_t i = 0; i < Y.size(); ++i)
    for (PointId p : pts)
      if (std::binary_search(Y[i].begin(), Y[i].end(), p)) {
        out.push_back(static_cast<int>(i));
        break;
      }
  return out;
}

}  // namespace detail

struct DpContext {
  const MetricSpace* m = nullptr;
  const Decomposition* d = nullptr;
  PairIndex pairs;
  DpCaps caps;
  CellParams cells;
  std::vector<std::vector<PointId>> can;  // Can(C) per cluster

  DpContext(const MetricSpace& metric, const Decomposition& dec, const SfpInstance& inst, const DpCaps& c,
            const CellParams& cp)
      : m(&metric), d(&dec), pairs(inst, metric.size()), caps(c), cells(cp) {
    for (const auto& cl : dec.clusters) can.push_back(candidate_centers(cl.id, metric, dec, cp));
  }
};

inline bool internal_constraints_ok(const DpContext& ctx, const Entry& e, std::string* why = nullptr) {
  auto fail = [&](const char* s) {
    if (why) *why = s;
    return false;
  };
  const auto& d = *ctx.d;
  if (e.cluster < 0 || e.cluster >= static_cast<int>(d.clusters.size())) return fail("cluster");
  const auto& C = d[e.cluster];
  if (!std::is_sorted(e.R.begin(), e.R.end()) || std::adjacent_find(e.R.begin(), e.R.end()) != e.R.end())
    return fail("R not canonical");
  if (static_cast<int>(e.R.size()) > ctx.caps.r_cap) return fail("|R| > r");
  for (PointId p : e.R)
    if (!C.is_portal(p)) return fail("R outside portals");
  std::vector<PointId> flat;
  for (const auto& y : e.Y) {
    if (y.empty() || !std::is_sorted(y.begin(), y.end())) return fail("Y part");
    flat.insert(flat.end(), y.begin(), y.end());
  }
  if (!std::is_sorted(e.Y.begin(), e.Y.end())) return fail("Y order");
  std::sort(flat.begin(), flat.end());
  if (flat != e.R) return fail("Y is not a partition of R");

  for (const auto* s : {&e.bas, &e.nbas})
    if (!std::is_sorted(s->begin(), s->end()) || std::adjacent_find(s->begin(), s->end()) != s->end())
      return fail("cells not canonical");
  for (int x : e.bas)
    if (std::binary_search(e.nbas.begin(), e.nbas.end(), x)) return fail("BAS and NBAS intersect");
  const auto cells = e.cells();
  if (static_cast<int>(cells.size()) > ctx.caps.rho_cap) return fail("|cells| > rho");
  for (int x : cells) {
    if (x < 0 || x >= static_cast<int>(d.clusters.size()) || !d.is_descendant_or_self(x, e.cluster))
      return fail("cell outside C");
    if (!std::binary_search(ctx.can[e.cluster].begin(), ctx.can[e.cluster].end(), d[x].center))
      return fail("cell center outside Can(C)");
  }
  for (int x : e.bas) {
    if (x == e.cluster) continue;
    for (int sib : siblings(d, x))
      if (!std::binary_search(cells.begin(), cells.end(), sib)) return fail("basic cell missing a sibling");
  }

  const auto regions = disjointify(d, cells);
  if (e.g.size() != regions.size()) return fail("g domain");
  for (const auto& r : regions) {
    auto it = e.g.find(r.inducer);
    if (it == e.g.end()) return fail("g domain");
    const auto& v = it->second;
    if (v.size() > 1) return fail("|g(e)| > 1");
    for (int y : v)
      if (y < 0 || y >= static_cast<int>(e.Y.size())) return fail("g value");
  }

  std::vector<int> seen(e.Y.size(), -1);
  for (std::size_t i = 0; i < e.P.size(); ++i)
    for (int y : e.P[i]) {
      if (y < 0 || y >= static_cast<int>(e.Y.size()) || seen[y] >= 0) return fail("P is not a partition of Y");
      seen[y] = static_cast<int>(i);
    }
  for (int s : seen)
    if (s < 0) return fail("P is not a partition of Y");
  for (const auto& [u, v] : e.g)
    for (int y : v)
      if (seen[y] != seen[v.front()]) return fail("g(e) spans two P parts");
  return true;
}

// The nine checks, read literally. I lists the child entries in the order of
// the cluster's children.
inline bool consistency_check(const DpContext& ctx, const Entry& E, const std::vector<const Entry*>& I,
                              const std::vector<Edge>& G, std::string* why = nullptr) {
  auto fail = [&](const char* s) {
    if (why) *why = s;
    return false;
  };
  const auto& d = *ctx.d;
  const auto& C = d[E.cluster];
  const std::size_t n = d.num_points();
  if (I.size() != C.children.size()) return fail("not a child entry collection");
  for (std::size_t k = 0; k < I.size(); ++k)
    if (I[k]->cluster != C.children[k]) return fail("not a child entry collection");

  // 1.
  PointSet lhs(n), rhs = C.members;
  for (PointId p : E.R) rhs.set(p);
  for (const auto* e : I) {
    lhs |= d[e->cluster].members;
    for (PointId p : e->R) lhs.set(p);
  }
  if (lhs != rhs) return fail("step 1");

  // 2. Y' over R' = union of R_i.
  std::vector<PointSet> parts;
  std::vector<std::size_t> owner_kid;
  PointSet rprime(n);
  for (std::size_t k = 0; k < I.size(); ++k)
    for (const auto& y : I[k]->Y) {
      parts.push_back(from_ids(n, y));
      owner_kid.push_back(k);
      rprime |= parts.back();
    }
  for (auto [x, y] : G)
    if (!rprime.test(x) || !rprime.test(y)) return fail("portal graph vertex outside R'");
  UnionFind uf(parts.size());
  for (std::size_t a = 0; a < parts.size(); ++a)
    for (std::size_t b = a + 1; b < parts.size(); ++b)
      if (parts[a].intersects(parts[b])) uf.unite(static_cast<int>(a), static_cast<int>(b));
  auto part_of = [&](PointId p) {
    for (std::size_t a = 0; a < parts.size(); ++a)
      if (parts[a].test(p)) return static_cast<int>(a);
    return -1;
  };
  for (auto [x, y] : G) uf.unite(part_of(x), part_of(y));
  std::map<int, PointSet> cls;
  for (std::size_t a = 0; a < parts.size(); ++a) {
    auto& s = cls[uf.find(static_cast<int>(a))];
    if (s.size() == 0) s.resize(n);
    s |= parts[a];
  }
  const PointSet Rset = from_ids(n, E.R);
  std::vector<std::vector<PointId>> restricted;
  std::map<int, int> yidx;  // Y' class -> index in E.Y of its restriction
  for (auto& [root, s] : cls) {
    auto v = to_ids(s & Rset);
    if (!v.empty()) restricted.push_back(v);
  }
  std::sort(restricted.begin(), restricted.end());
  if (restricted != E.Y) return fail("step 2");
  for (auto& [root, s] : cls) {
    auto v = to_ids(s & Rset);
    if (v.empty()) continue;
    yidx[root] = static_cast<int>(std::lower_bound(E.Y.begin(), E.Y.end(), v) - E.Y.begin());
  }
  auto class_of_child_part = [&](std::size_t k, int yi) {
    return uf.find(part_of(I[k]->Y[static_cast<std::size_t>(yi)].front()));
  };

  // 3.
  for (int e : E.bas) {
    bool ok = false;
    for (const auto* c : I)
      for (int x : c->bas) ok = ok || x == e || d[x].parent == e;
    if (!ok) return fail("step 3");
  }
  // 4.
  {
    std::set<int> child_cells;
    for (const auto* c : I) {
      child_cells.insert(c->bas.begin(), c->bas.end());
      child_cells.insert(c->nbas.begin(), c->nbas.end());
    }
    for (int e : E.nbas) {
      if (child_cells.count(e)) continue;
      for (int ch : d[e].children)
        if (!child_cells.count(ch)) return fail("step 4");
    }
  }
  // 5. g'_i(e) = parts of Y reached from g_i(e) through Y'.
  std::vector<std::vector<DisjointCell>> U(I.size());
  std::vector<std::vector<std::vector<int>>> gp(I.size());
  for (std::size_t k = 0; k < I.size(); ++k) {
    U[k] = disjointify(d, I[k]->cells());
    for (const auto& r : U[k]) {
      std::set<int> out;
      auto it = I[k]->g.find(r.inducer);
      if (it != I[k]->g.end())
        for (int yi : it->second) {
          auto f = yidx.find(class_of_child_part(k, yi));
          if (f != yidx.end()) out.insert(f->second);
        }
      gp[k].push_back({out.begin(), out.end()});
    }
  }
  for (std::size_t k = 0; k < I.size(); ++k)
    for (int u : I[k]->bas) {
      bool trigger = false;
      for (std::size_t r = 0; r < U[k].size(); ++r)
        if (U[k][r].region.any() && U[k][r].region.is_subset_of(d[u].members) && !gp[k][r].empty()) trigger = true;
      if (!trigger) continue;
      bool ok = false;
      for (int x : E.bas) ok = ok || x == u || d[u].parent == x;
      if (!ok) return fail("step 5");
    }
  // 6.
  for (const auto& r : disjointify(d, E.cells())) {
    std::set<int> agg;
    for (std::size_t k = 0; k < I.size(); ++k)
      for (std::size_t q = 0; q < U[k].size(); ++q) {
        const auto& cr = U[k][q].region;
        if (!cr.any() || !cr.intersects(r.region)) continue;
        if (!cr.is_subset_of(r.region)) return fail("step 6: child region straddles a region");
        agg.insert(gp[k][q].begin(), gp[k][q].end());
      }
    auto it = E.g.find(r.inducer);
    if (it == E.g.end() || std::vector<int>(agg.begin(), agg.end()) != it->second) return fail("step 6");
  }
  std::vector<int> ppart(E.Y.size(), -1);
  for (std::size_t i = 0; i < E.P.size(); ++i)
    for (int y : E.P[i]) ppart[y] = static_cast<int>(i);
  auto same_p = [&](const std::vector<int>& ys) {
    for (int y : ys)
      if (ppart[y] != ppart[ys.front()]) return false;
    return true;
  };
  // 7.
  for (std::size_t k = 0; k < I.size(); ++k)
    for (const auto& part : I[k]->P)
      for (std::size_t a = 0; a < part.size(); ++a)
        for (std::size_t b = a + 1; b < part.size(); ++b) {
          int c1 = class_of_child_part(k, part[a]), c2 = class_of_child_part(k, part[b]);
          if (c1 == c2) continue;
          auto f1 = yidx.find(c1), f2 = yidx.find(c2);
          if (f1 == yidx.end() || f2 == yidx.end() || !same_p({f1->second, f2->second})) return fail("step 7");
        }
  // 8.
  auto locate = [&](PointId p) -> std::pair<int, int> {
    for (std::size_t k = 0; k < I.size(); ++k)
      if (d[I[k]->cluster].contains(p)) return {static_cast<int>(k), detail::region_of(U[k], p)};
    return {-1, -1};
  };
  for (const auto& pr : ctx.pairs.pairs) {
    if (!C.contains(pr.a) || !C.contains(pr.b)) continue;
    auto [ka, ra] = locate(pr.a);
    auto [kb, rb] = locate(pr.b);
    if (ka == kb) continue;
    if (ra < 0 || rb < 0) return fail("step 8: terminal outside every region");
    std::set<int> ca, cb;
    if (auto it = I[ka]->g.find(U[ka][ra].inducer); it != I[ka]->g.end())
      for (int yi : it->second) ca.insert(class_of_child_part(ka, yi));
    if (auto it = I[kb]->g.find(U[kb][rb].inducer); it != I[kb]->g.end())
      for (int yi : it->second) cb.insert(class_of_child_part(kb, yi));
    bool connected = false;
    for (int x : ca) connected = connected || cb.count(x);
    if (connected) continue;
    const auto &ga = gp[ka][ra], &gb = gp[kb][rb];
    if (ga.empty() || gb.empty()) return fail("step 8");
    std::vector<int> u(ga);
    u.insert(u.end(), gb.begin(), gb.end());
    if (!same_p(u)) return fail("step 8");
  }
  // 9.
  for (PointId a : C.points) {
    if (!ctx.pairs.is_terminal(a) || !ctx.pairs.isolated_in(a, C.members)) continue;
    auto [k, r] = locate(a);
    if (r < 0 || gp[k][r].empty()) return fail("step 9");
  }
  return true;
}

inline Entry base_entry(const Decomposition& d, int leaf) {
  Entry e;
  e.cluster = leaf;
  const PointId x = d[leaf].points.front();
  e.R = {x};
  e.Y = {{x}};
  e.bas = {leaf};
  e.g[leaf] = {0};
  e.P = {{0}};
  return e;
}

inline Entry final_entry(const Decomposition& d) {
  Entry e;
  e.cluster = d.root().id;
  return e;
}

struct Row {
  Entry e;
  Dist val = kInf;
  std::vector<int> kids;  // row index in each child table
  std::vector<Edge> G;
  std::vector<DisjointCell> regions;
  std::vector<int> region_part;  // Y index reached by each region, -1 if none
};

struct Table {
  std::vector<Row> rows;
  std::unordered_map<EntryKey, int, EntryKeyHash> index;

  const Row* find(const Entry& e) const {
    auto it = index.find(entry_key(e));
    return it == index.end() ? nullptr : &rows[static_cast<std::size_t>(it->second)];
  }
};

struct DpStats {
  std::vector<std::size_t> entries;    // per cluster
  std::size_t combos = 0;
  std::size_t partitions = 0;
  std::size_t tuples = 0;              // (I, G) tuples composed into entries
  std::size_t verify_failures = 0;     // generated tuples rejected by the checker
  std::vector<double> ms_per_height;
  CapCounters caps;
};

namespace detail {

inline void attach_regions(const Decomposition& d, Row& row) {
  row.regions = disjointify(d, row.e.cells());
  row.region_part.assign(row.regions.size(), -1);
  for (std::size_t r = 0; r < row.regions.size(); ++r) {
    auto it = row.e.g.find(row.regions[r].inducer);
    if (it != row.e.g.end() && !it->second.empty()) row.region_part[r] = it->second.front();
  }
}

struct Supernode {
  int kid = 0;
  int part = 0;
  std::vector<PointId> portals;
};

struct ComposeResult {
  std::optional<Entry> entry;
  std::string fail;
  bool rho_exceeded = false;
};

// Cell families already derived for one child combination, keyed by the
// reach pattern of the child regions with parts relabeled in order of first
// appearance.
using CellCache = std::map<std::vector<int>, std::optional<Entry>>;

// Coarsest cell family for the parent: start from C plus the children's
// cells, then merge sibling groups bottom-up while every region still reaches
// at most one part and step 5 stays satisfied.
inline bool canonical_cells(const DpContext& ctx, int c, const std::vector<const Row*>& kids,
                            const std::vector<std::vector<int>>& gprime, Entry& out) {
  const auto& d = *ctx.d;
  std::set<int> fam{c};
  std::map<int, int> val;  // frontier node -> Y index or -1
  std::set<int> required;  // child basic cells with a reaching region below
  for (std::size_t k = 0; k < kids.size(); ++k) {
    const auto& row = *kids[k];
    for (int x : row.e.cells()) fam.insert(x);
    for (std::size_t r = 0; r < row.regions.size(); ++r)
      if (row.regions[r].region.any()) val[row.regions[r].inducer] = gprime[k][r];
    for (int u : row.e.bas)
      for (std::size_t r = 0; r < row.regions.size(); ++r)
        if (gprime[k][r] >= 0 && row.regions[r].region.any() && d.is_descendant_or_self(row.regions[r].inducer, u))
          required.insert(u);
  }
  auto expanded = [&](int x) {
    for (int ch : d[x].children)
      if (fam.count(ch)) return true;
    return false;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> cand;
    for (int x : fam) {
      if (!expanded(x)) continue;
      bool leaves = true;
      for (int ch : d[x].children) leaves = leaves && fam.count(ch) && !expanded(ch);
      if (leaves) cand.push_back(x);
    }
    std::stable_sort(cand.begin(), cand.end(), [&](int a, int b) { return d[a].height < d[b].height; });
    for (int x : cand) {
      int merged = -1;
      bool ok = true;
      for (int ch : d[x].children) {
        int v = val.count(ch) ? val[ch] : -1;
        if (v < 0) continue;
        if (merged >= 0 && merged != v) ok = false;
        merged = v;
      }
      if (!ok) continue;
      for (int q : required)
        if (!fam.count(q) && fam.count(d[q].parent) && d[d[q].parent].parent == x) ok = false;
      if (!ok) continue;
      for (int ch : d[x].children) {
        fam.erase(ch);
        val.erase(ch);
      }
      val[x] = merged;
      changed = true;
      break;
    }
  }
  if (static_cast<int>(fam.size()) > ctx.caps.rho_cap) return false;
  std::vector<int> cells(fam.begin(), fam.end());
  out.bas.clear();
  out.nbas.clear();
  out.g.clear();
  for (int x : cells) {
    bool reach = x == c;
    for (auto& [node, v] : val)
      if (v >= 0 && d.is_descendant_or_self(node, x)) reach = true;
    (reach ? out.bas : out.nbas).push_back(x);
  }
  for (const auto& r : disjointify(d, cells)) {
    auto it = val.find(r.inducer);
    out.g[r.inducer] = (r.region.any() && it != val.end() && it->second >= 0) ? std::vector<int>{it->second}
                                                                             : std::vector<int>{};
  }
  return true;
}

}  // namespace detail

// Parent entry obtained from child rows, portal graph G and active set R, or
// the reason none exists.
inline detail::ComposeResult compose_entry(const DpContext& ctx, int c, const std::vector<const Row*>& kids,
                                           const std::vector<Edge>& G, const std::vector<PointId>& R,
                                           detail::CellCache* cache = nullptr) {
  const auto& d = *ctx.d;
  const auto& C = d[c];
  detail::ComposeResult res;
  std::vector<detail::Supernode> sn;
  std::map<PointId, int> sn_of;
  for (std::size_t k = 0; k < kids.size(); ++k)
    for (std::size_t j = 0; j < kids[k]->e.Y.size(); ++j) {
      for (PointId p : kids[k]->e.Y[j]) sn_of[p] = static_cast<int>(sn.size());
      sn.push_back({static_cast<int>(k), static_cast<int>(j), kids[k]->e.Y[j]});
    }
  UnionFind uf(sn.size());
  for (auto [x, y] : G) {
    if (!sn_of.count(x) || !sn_of.count(y)) {
      res.fail = "portal graph vertex is not an active child portal";
      return res;
    }
    uf.unite(sn_of[x], sn_of[y]);
  }
  for (PointId p : R)
    if (!sn_of.count(p)) {
      res.fail = "active portal is not an active child portal";
      return res;
    }
  Entry e;
  e.cluster = c;
  e.R = R;
  std::sort(e.R.begin(), e.R.end());
  std::map<int, std::vector<PointId>> by_block;
  for (PointId p : e.R) by_block[uf.find(sn_of[p])].push_back(p);
  for (auto& [b, v] : by_block) e.Y.push_back(v);
  std::sort(e.Y.begin(), e.Y.end());
  std::map<int, int> yid;
  for (auto& [b, v] : by_block)
    yid[b] = static_cast<int>(std::lower_bound(e.Y.begin(), e.Y.end(), v) - e.Y.begin());
  auto y_of_sn = [&](int s) {
    auto it = yid.find(uf.find(s));
    return it == yid.end() ? -1 : it->second;
  };
  auto sn_index = [&](std::size_t k, int part) { return sn_of[kids[k]->e.Y[static_cast<std::size_t>(part)].front()]; };

  std::vector<std::vector<int>> gprime(kids.size());
  for (std::size_t k = 0; k < kids.size(); ++k)
    for (std::size_t r = 0; r < kids[k]->regions.size(); ++r) {
      int part = kids[k]->region_part[r];
      gprime[k].push_back(part < 0 ? -1 : y_of_sn(sn_index(k, part)));
    }

  UnionFind pu(e.Y.size());
  auto locate = [&](PointId p) -> std::pair<int, int> {
    for (std::size_t k = 0; k < kids.size(); ++k)
      if (d[kids[k]->e.cluster].contains(p))
        return {static_cast<int>(k), detail::region_of(kids[k]->regions, p)};
    return {-1, -1};
  };
  for (const auto& pr : ctx.pairs.pairs) {
    if (!C.contains(pr.a) || !C.contains(pr.b)) continue;
    auto [ka, ra] = locate(pr.a);
    auto [kb, rb] = locate(pr.b);
    if (ka == kb) continue;
    if (ra < 0 || rb < 0 || kids[ka]->region_part[ra] < 0 || kids[kb]->region_part[rb] < 0) {
      res.fail = "split pair with a terminal not reaching a portal";
      return res;
    }
    int sa = sn_index(ka, kids[ka]->region_part[ra]), sb = sn_index(kb, kids[kb]->region_part[rb]);
    if (uf.same(sa, sb)) continue;
    int ya = y_of_sn(sa), yb = y_of_sn(sb);
    if (ya < 0 || yb < 0) {
      res.fail = "split pair neither connected nor forwarded";
      return res;
    }
    pu.unite(ya, yb);
  }
  for (std::size_t k = 0; k < kids.size(); ++k)
    for (const auto& part : kids[k]->e.P)
      for (std::size_t a = 1; a < part.size(); ++a) {
        int s1 = sn_index(k, part[0]), s2 = sn_index(k, part[a]);
        if (uf.same(s1, s2)) continue;
        int y1 = y_of_sn(s1), y2 = y_of_sn(s2);
        if (y1 < 0 || y2 < 0) {
          res.fail = "child promise neither connected nor forwarded";
          return res;
        }
        pu.unite(y1, y2);
      }
  for (PointId a : C.points) {
    if (!ctx.pairs.is_terminal(a) || !ctx.pairs.isolated_in(a, C.members)) continue;
    auto [k, r] = locate(a);
    if (r < 0 || gprime[k][r] < 0) {
      res.fail = "isolated terminal does not reach an active portal";
      return res;
    }
  }
  std::map<int, std::vector<int>> pp;
  for (std::size_t y = 0; y < e.Y.size(); ++y) pp[pu.find(static_cast<int>(y))].push_back(static_cast<int>(y));
  for (auto& [r, v] : pp) e.P.push_back(v);
  e.P = detail::canonical_partition(e.P);

  if (c != d.root().id || !e.R.empty()) {
    std::vector<int> key, label_to_y;
    std::map<int, int> y_to_label;
    auto relabeled = gprime;
    for (auto& v : relabeled) {
      for (int& y : v) {
        if (y >= 0) {
          auto [it, fresh] = y_to_label.emplace(y, static_cast<int>(label_to_y.size()));
          if (fresh) label_to_y.push_back(y);
          y = it->second;
        }
        key.push_back(y);
      }
      key.push_back(-2);
    }
    detail::CellCache local;
    auto& slot = cache ? *cache : local;
    auto it = slot.find(key);
    if (it == slot.end()) {
      Entry cells;
      it = slot.emplace(key, detail::canonical_cells(ctx, c, kids, relabeled, cells) ? std::optional<Entry>(std::move(cells))
                                                                                     : std::nullopt)
               .first;
    }
    if (!it->second) {
      res.rho_exceeded = true;
      res.fail = "cell family exceeds rho";
      return res;
    }
    e.bas = it->second->bas;
    e.nbas = it->second->nbas;
    for (const auto& [inducer, v] : it->second->g) {
      auto& out = e.g[inducer];
      for (int y : v) out.push_back(label_to_y[static_cast<std::size_t>(y)]);
    }
  }
  res.entry = std::move(e);
  return res;
}

namespace detail {

// Restricted growth strings over n items with at most max_merges items
// placed into an already open block (n - #blocks <= max_merges). Returns
// whether any string was cut by that bound.
template <class Fn>
bool for_each_partition(int n, int max_merges, Fn&& fn) {
  std::vector<int> lab(static_cast<std::size_t>(n), 0);
  bool cut = false;
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      fn(lab, used);
      return;
    }
    for (int b = 0; b <= used; ++b) {
      const bool merge = b < used;
      if (merge && i - used + 1 > max_merges) {
        cut = true;
        continue;
      }
      lab[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
  return cut;
}

}  // namespace detail

// Streams every (child rows, G) tuple for cluster c together with the entry
// it composes into. Portal graphs are minimum spanning trees over groups of
// child Y-parts, using edges between different children of length at most
// 4 s^Ht(C). Returns false when a cap stopped the stream early.
inline bool enumerate_candidates(const DpContext& ctx, int c, const std::vector<Table>& tables,
                                 const std::function<void(const std::vector<int>&, const std::vector<Edge>&,
                                                          const std::vector<PointId>&, Entry&&, Dist)>& emit,
                                 DpStats& stats, std::optional<std::vector<PointId>> fixed_R = std::nullopt) {
  const auto& d = *ctx.d;
  const auto& m = *ctx.m;
  const auto& C = d[c];
  const bool is_root = c == d.root().id;
  const auto& ch = C.children;
  const std::size_t nk = ch.size();
  for (int k : ch)
    if (tables[k].rows.empty()) return true;
  const Dist limit = sat_mul(4, m.scale_pow(d.s, C.height));

  // Terminals that must reach a part of their child: split pairs and
  // isolated terminals.
  std::vector<PointId> needy;
  for (PointId a : C.points) {
    if (!ctx.pairs.is_terminal(a)) continue;
    bool need = ctx.pairs.isolated_in(a, C.members);
    for (PointId b : ctx.pairs.partners[a])
      if (C.contains(b) && d.child_containing(c, a) != d.child_containing(c, b)) need = true;
    if (need) needy.push_back(a);
  }

  std::vector<int> idx(nk, 0);
  std::size_t combos = 0;
  while (true) {
    if (++combos > ctx.caps.max_combos) {
      ++stats.caps.combos;
      return false;
    }
    ++stats.combos;
    std::vector<const Row*> kids(nk);
    detail::CellCache cell_cache;
    for (std::size_t k = 0; k < nk; ++k) kids[k] = &tables[ch[k]].rows[idx[k]];

    bool viable = true;
    for (PointId a : needy) {
      std::size_t k = 0;
      while (!d[ch[k]].contains(a)) ++k;
      int r = detail::region_of(kids[k]->regions, a);
      if (r < 0 || kids[k]->region_part[r] < 0) viable = false;
    }
    std::vector<detail::Supernode> sn;
    for (std::size_t k = 0; k < nk && viable; ++k)
      for (std::size_t j = 0; j < kids[k]->e.Y.size(); ++j)
        sn.push_back({static_cast<int>(k), static_cast<int>(j), kids[k]->e.Y[j]});
    if (viable && static_cast<int>(sn.size()) > ctx.caps.max_supernodes) {
      ++stats.caps.supernodes;
      viable = false;
    }

    if (viable) {
      const int ns = static_cast<int>(sn.size());
      std::vector<std::vector<Dist>> w(ns, std::vector<Dist>(ns, kInf));
      std::vector<std::vector<Edge>> best(ns, std::vector<Edge>(ns));
      for (int a = 0; a < ns; ++a)
        for (int b = a + 1; b < ns; ++b) {
          if (sn[a].kid == sn[b].kid) continue;
          for (PointId x : sn[a].portals)
            for (PointId y : sn[b].portals) {
              Dist v = m.dist(x, y);
              Edge e = make_edge(x, y);
              if (v <= limit && (v < w[a][b] || (v == w[a][b] && e < best[a][b]))) {
                w[a][b] = w[b][a] = v;
                best[a][b] = best[b][a] = e;
              }
            }
        }
      Dist base = 0;
      for (const auto* r : kids) base += r->val;
      const bool leaf_kids = C.height == 1;

      const bool edge_cut = detail::for_each_partition(ns, ctx.caps.edge_cap, [&](const std::vector<int>& lab, int nb) {
        ++stats.partitions;
        std::vector<std::vector<int>> blocks(static_cast<std::size_t>(nb));
        for (int s = 0; s < ns; ++s) blocks[lab[s]].push_back(s);
        std::vector<Edge> G;
        Dist wg = 0;
        for (const auto& blk : blocks) {
          if (blk.size() < 2) continue;
          // Prim over the block.
          std::vector<char> in(blk.size(), 0);
          std::vector<Dist> dist(blk.size(), kInf);
          std::vector<int> from(blk.size(), -1);
          dist[0] = 0;
          for (std::size_t it = 0; it < blk.size(); ++it) {
            int u = -1;
            for (std::size_t i = 0; i < blk.size(); ++i)
              if (!in[i] && (u < 0 || dist[i] < dist[u])) u = static_cast<int>(i);
            if (dist[u] >= kInf) return;
            in[u] = 1;
            if (from[u] >= 0) {
              G.push_back(best[blk[u]][blk[from[u]]]);
              wg += w[blk[u]][blk[from[u]]];
            }
            for (std::size_t i = 0; i < blk.size(); ++i)
              if (!in[i] && w[blk[u]][blk[i]] < dist[i]) {
                dist[i] = w[blk[u]][blk[i]];
                from[i] = u;
              }
          }
        }
        std::sort(G.begin(), G.end());

        // Which blocks must keep an active portal.
        std::vector<int> block_of(ns);
        for (int s = 0; s < ns; ++s) block_of[s] = lab[s];
        std::vector<char> need(static_cast<std::size_t>(nb), 0), demand(static_cast<std::size_t>(nb), 0);
        auto sn_of_terminal = [&](PointId a) {
          std::size_t k = 0;
          while (!d[ch[k]].contains(a)) ++k;
          int r = detail::region_of(kids[k]->regions, a);
          int part = kids[k]->region_part[r];
          for (int s = 0; s < ns; ++s)
            if (sn[s].kid == static_cast<int>(k) && sn[s].part == part) return s;
          return -1;
        };
        for (PointId a : needy) {
          const int s = sn_of_terminal(a);
          if (ctx.pairs.isolated_in(a, C.members)) need[block_of[s]] = 1;
          for (PointId b : ctx.pairs.partners[a]) {
            if (!C.contains(b) || d.child_containing(c, a) == d.child_containing(c, b)) continue;
            const int t = sn_of_terminal(b);
            if (block_of[s] == block_of[t]) {
              demand[block_of[s]] = 1;
            } else {
              need[block_of[s]] = need[block_of[t]] = 1;
            }
          }
        }
        for (std::size_t k = 0; k < nk; ++k)
          for (const auto& part : kids[k]->e.P)
            for (std::size_t a = 1; a < part.size(); ++a) {
              int s1 = -1, s2 = -1;
              for (int s = 0; s < ns; ++s) {
                if (sn[s].kid != static_cast<int>(k)) continue;
                if (sn[s].part == part[0]) s1 = s;
                if (sn[s].part == part[a]) s2 = s;
              }
              if (block_of[s1] == block_of[s2]) {
                demand[block_of[s1]] = 1;
              } else {
                need[block_of[s1]] = need[block_of[s2]] = 1;
              }
            }
        for (int b = 0; b < nb; ++b) {
          const auto& blk = blocks[b];
          if (blk.size() == 1 && !leaf_kids) need[b] = 1;  // otherwise the part is dead
          if (blk.size() > 1 && !demand[b]) need[b] = 1;   // otherwise the group is useless
        }

        std::vector<std::vector<PointId>> cand(static_cast<std::size_t>(nb));
        int min_r = 0;
        for (int b = 0; b < nb; ++b) {
          for (int s : blocks[b])
            for (PointId p : sn[s].portals)
              if (C.is_portal(p)) cand[b].push_back(p);
          std::sort(cand[b].begin(), cand[b].end());
          if (need[b]) {
            if (cand[b].empty() || is_root) return;
            ++min_r;
          }
        }
        if (min_r > ctx.caps.r_cap) {
          ++stats.caps.r;
          return;
        }

        auto finish = [&](const std::vector<PointId>& R) {
          ++stats.tuples;
          auto res = compose_entry(ctx, c, kids, G, R, &cell_cache);
          if (!res.entry) {
            if (res.rho_exceeded) ++stats.caps.rho;
            return;
          }
          std::vector<int> rows(nk);
          for (std::size_t k = 0; k < nk; ++k) rows[k] = idx[k];
          emit(rows, G, R, std::move(*res.entry), base + wg);
        };

        if (fixed_R) {
          std::vector<PointId> R = *fixed_R;
          for (int b = 0; b < nb; ++b) {
            bool has = false;
            for (PointId p : cand[b]) has = has || std::binary_search(R.begin(), R.end(), p);
            if (need[b] && !has) return;
          }
          finish(R);
          return;
        }
        // Every compose failure depends only on which blocks keep an active
        // portal, so each block mask is tried once with a representative R
        // before its portal subsets are enumerated.
        std::vector<char> active(static_cast<std::size_t>(nb), 0);
        std::vector<PointId> R;
        std::function<void(int)> choose = [&](int b) {
          if (b == nb) {
            std::vector<PointId> sorted = R;
            std::sort(sorted.begin(), sorted.end());
            finish(sorted);
            return;
          }
          if (!active[b]) {
            choose(b + 1);
            return;
          }
          const auto& cs = cand[b];
          for (std::size_t mask = 1; mask < std::size_t{1} << cs.size(); ++mask) {
            const int cnt = std::popcount(mask);
            if (static_cast<int>(R.size()) + cnt > ctx.caps.r_cap) continue;
            for (std::size_t i = 0; i < cs.size(); ++i)
              if (mask >> i & 1) R.push_back(cs[i]);
            choose(b + 1);
            R.resize(R.size() - static_cast<std::size_t>(cnt));
          }
        };
        std::function<void(int, int)> pick = [&](int b, int used) {
          if (used > ctx.caps.r_cap) return;
          if (b == nb) {
            std::vector<PointId> rep;
            for (int x = 0; x < nb; ++x)
              if (active[x]) rep.push_back(cand[x].front());
            std::sort(rep.begin(), rep.end());
            auto res = compose_entry(ctx, c, kids, G, rep, &cell_cache);
            if (!res.entry) {
              ++stats.tuples;
              if (res.rho_exceeded) ++stats.caps.rho;
              return;
            }
            choose(0);
            return;
          }
          if (!need[b]) {
            active[b] = 0;
            pick(b + 1, used);
          }
          if (!cand[b].empty()) {
            active[b] = 1;
            pick(b + 1, used + 1);
            active[b] = 0;
          }
        };
        pick(0, 0);
      });
      if (edge_cut) ++stats.caps.edges;
    }

    std::size_t k = 0;
    while (k < nk && ++idx[k] == static_cast<int>(tables[ch[k]].rows.size())) idx[k++] = 0;
    if (k == nk) break;
  }
  return true;
}

struct DpResult {
  std::vector<Table> tables;  // per cluster
  Dist value = kInf;          // Val(final entry)
  DpStats stats;
};

// Bottom-up tables over the cluster tree. Each table holds the finite-value
// entries of its cluster with back-pointers to the minimizing (I, G).
inline DpResult run_dp(const DpContext& ctx) {
  const auto& d = *ctx.d;
  DpResult res;
  res.tables.resize(d.clusters.size());
  res.stats.entries.assign(d.clusters.size(), 0);
  res.stats.ms_per_height.assign(static_cast<std::size_t>(d.L), 0.0);
  for (int h = 0; h < d.L; ++h) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int c : d.clusters_at(h)) {
      Table& t = res.tables[c];
      if (h == 0) {
        Row row;
        row.e = base_entry(d, c);
        row.val = 0;
        detail::attach_regions(d, row);
        t.index[entry_key(row.e)] = 0;
        t.rows.push_back(std::move(row));
        continue;
      }
      std::optional<std::vector<PointId>> fixed;
      if (c == d.root().id) fixed = std::vector<PointId>{};
      enumerate_candidates(
          ctx, c, res.tables,
          [&](const std::vector<int>& kids, const std::vector<Edge>& G, const std::vector<PointId>&, Entry&& e, Dist v) {
            if (c == d.root().id && !(e == final_entry(d))) return;
            if (ctx.caps.verify) {
              std::vector<const Entry*> I;
              for (std::size_t k = 0; k < kids.size(); ++k) I.push_back(&res.tables[d[c].children[k]].rows[kids[k]].e);
              if (!internal_constraints_ok(ctx, e) || !consistency_check(ctx, e, I, G)) {
                ++res.stats.verify_failures;
                return;
              }
            }
            auto key = entry_key(e);
            auto it = t.index.find(key);
            if (it != t.index.end()) {
              Row& r = t.rows[it->second];
              if (v < r.val) {
                r.val = v;
                r.kids = kids;
                r.G = G;
              }
              return;
            }
            Row row;
            row.e = std::move(e);
            row.val = v;
            row.kids = kids;
            row.G = G;
            detail::attach_regions(d, row);
            t.index.emplace(std::move(key), static_cast<int>(t.rows.size()));
            t.rows.push_back(std::move(row));
          },
          res.stats, fixed);
      if (t.rows.size() > ctx.caps.max_entries) {
        // Keep the cheapest row of every interface (R, Y, P) first, then
        // fill by value; cheap forwarding rows would otherwise crowd out
        // the closed ones.
        ++res.stats.caps.entries;
        std::vector<int> order(t.rows.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return t.rows[a].val < t.rows[b].val; });
        std::set<std::tuple<std::vector<PointId>, std::vector<std::vector<PointId>>, std::vector<std::vector<int>>>> seen;
        std::vector<int> first, rest;
        for (int i : order) {
          const auto& e = t.rows[i].e;
          (seen.insert({e.R, e.Y, e.P}).second ? first : rest).push_back(i);
        }
        order = std::move(first);
        order.insert(order.end(), rest.begin(), rest.end());
        order.resize(ctx.caps.max_entries);
        std::sort(order.begin(), order.end());
        Table kept;
        for (int i : order) {
          kept.index[entry_key(t.rows[i].e)] = static_cast<int>(kept.rows.size());
          kept.rows.push_back(std::move(t.rows[i]));
        }
        t = std::move(kept);
      }
      res.stats.entries[c] = t.rows.size();
    }
    res.stats.ms_per_height[h] =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  if (const Row* r = res.tables[d.root().id].find(final_entry(d))) res.value = r->val;
  return res;
}

// Memo lookup; an entry missing from the tables is evaluated by streaming its
// candidates and keeping those that compose into it.
inline Dist eval_value(const DpContext& ctx, DpResult& dp, const Entry& e) {
  const auto& d = *ctx.d;
  if (const Row* r = dp.tables[e.cluster].find(e)) return r->val;
  if (d[e.cluster].height == 0) return kInf;
  Dist best = kInf;
  Row row;
  enumerate_candidates(
      ctx, e.cluster, dp.tables,
      [&](const std::vector<int>& kids, const std::vector<Edge>& G, const std::vector<PointId>&, Entry&& got, Dist v) {
        if (!(got == e) || v >= best) return;
        std::vector<const Entry*> I;
        for (std::size_t k = 0; k < kids.size(); ++k) I.push_back(&dp.tables[d[e.cluster].children[k]].rows[kids[k]].e);
        if (!consistency_check(ctx, e, I, G)) return;
        best = v;
        row.kids = kids;
        row.G = G;
      },
      dp.stats, e.R);
  if (best < kInf) {
    row.e = e;
    row.val = best;
    detail::attach_regions(d, row);
    auto& t = dp.tables[e.cluster];
    t.index[entry_key(e)] = static_cast<int>(t.rows.size());
    t.rows.push_back(std::move(row));
  }
  return best;
}

// Union of the portal graphs along the back-pointers of the final entry.
inline Forest extract_solution(const DpContext& ctx, const DpResult& dp) {
  const auto& d = *ctx.d;
  const Row* root = dp.tables[d.root().id].find(final_entry(d));
  if (!root || root->val >= kInf) throw MissingBackPointer("final entry has no finite value");
  Forest f;
  std::function<void(int, const Row&)> walk = [&](int c, const Row& r) {
    if (d[c].height == 0) return;
    if (r.kids.size() != d[c].children.size()) throw MissingBackPointer();
    for (auto [x, y] : r.G) f.add(x, y);
    for (std::size_t k = 0; k < r.kids.size(); ++k) {
      const int ch = d[c].children[k];
      const auto& t = dp.tables[ch];
      if (r.kids[k] < 0 || r.kids[k] >= static_cast<int>(t.rows.size())) throw MissingBackPointer();
      walk(ch, t.rows[r.kids[k]]);
    }
  };
  walk(d.root().id, *root);
  return f;
}

// Entry tree of a concrete forest: R(C) = points of C with an edge leaving C,
// G(C) = edges whose lowest common cluster is C. Each entry is composed from
// its children exactly as the DP would.
struct Witness {
  bool ok = false;
  std::string reason;
  CapCounters caps;  // caps the forest does not fit in
  std::vector<Row> rows;  // per cluster
};

inline Witness decompose_solution(const DpContext& ctx, const Forest& f) {
  const auto& d = *ctx.d;
  Witness w;
  w.rows.resize(d.clusters.size());
  std::vector<std::vector<Edge>> G(d.clusters.size());
  for (auto [x, y] : f.edges()) {
    const int c = d.lca(x, y);
    if (d[c].height == 0) continue;
    G[c].push_back(make_edge(x, y));
  }
  for (int h = 0; h < d.L; ++h)
    for (int c : d.clusters_at(h)) {
      Row& row = w.rows[c];
      if (h == 0) {
        row.e = base_entry(d, c);
        row.val = 0;
        detail::attach_regions(d, row);
        continue;
      }
      std::vector<PointId> R;
      if (c != d.root().id)
        for (PointId p : d[c].points) {
          bool leaves = false;
          for (auto [x, y] : f.edges())
            if ((x == p && !d[c].contains(y)) || (y == p && !d[c].contains(x))) leaves = true;
          if (leaves) R.push_back(p);
        }
      std::sort(G[c].begin(), G[c].end());
      if (static_cast<int>(R.size()) > ctx.caps.r_cap) ++w.caps.r;
      if (static_cast<int>(G[c].size()) > ctx.caps.edge_cap) ++w.caps.edges;
      std::vector<const Row*> kids;
      int nsn = 0;
      for (int k : d[c].children) {
        kids.push_back(&w.rows[k]);
        nsn += static_cast<int>(w.rows[k].e.Y.size());
      }
      if (nsn > ctx.caps.max_supernodes) ++w.caps.supernodes;
      for (PointId p : R)
        if (!d[c].is_portal(p)) {
          w.reason = "forest is not portal-respecting";
          return w;
        }
      DpCaps loose = ctx.caps;
      loose.rho_cap = std::numeric_limits<int>::max();
      loose.r_cap = std::numeric_limits<int>::max();
      DpContext lctx = ctx;
      lctx.caps = loose;
      auto res = compose_entry(lctx, c, kids, G[c], R);
      if (!res.entry) {
        w.reason = "cluster " + std::to_string(c) + ": " + res.fail;
        return w;
      }
      row.e = std::move(*res.entry);
      if (static_cast<int>(row.e.cells().size()) > ctx.caps.rho_cap) ++w.caps.rho;
      Dist wg = 0;
      for (auto [x, y] : G[c]) wg += ctx.m->dist(x, y);
      row.val = wg;
      for (const auto* k : kids) row.val += k->val;
      row.G = G[c];
      detail::attach_regions(d, row);
      std::vector<const Entry*> I;
      for (const auto* k : kids) I.push_back(&k->e);
      std::string why;
      if (!consistency_check(lctx, row.e, I, G[c], &why)) {
        w.reason = "cluster " + std::to_string(c) + " fails " + why;
        return w;
      }
    }
  if (!(w.rows[d.root().id].e == final_entry(d))) {
    w.reason = "root entry is not the final entry";
    return w;
  }
  w.ok = true;
  return w;
}

}  // namespace sfp
