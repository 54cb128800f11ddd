#pragma once

#include "sfp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <vector>

namespace sfp {

enum class Mode { practical, theory };

struct DecompositionParams {
  double k = 2.0;         // doubling dimension bound
  Mode mode = Mode::practical;
  int portal_drop = 2;    // practical mode: portals from N_{i - portal_drop}
  double eps = 0.5;       // theory mode portal threshold
  double c_cut = 2.0;     // beta = c_cut * k, calibrated on planar generators
};

struct RadiusSample {
  int i = 0;
  PointId u = 0;
  Dist h = 0;  // scaled, in [0, s^i]
};

struct Cluster {
  int id = 0;
  int height = 0;
  PointId center = 0;
  PointSet members;
  std::vector<PointId> points;  // sorted member ids
  int parent = -1;
  std::vector<int> children;
  std::vector<PointId> portals;  // sorted

  bool contains(PointId p) const { return members.test(static_cast<std::size_t>(p)); }
  bool is_portal(PointId p) const { return std::binary_search(portals.begin(), portals.end(), p); }
};

class Decomposition {
 public:
  int s = 4;
  int L = 1;
  double chi = 4.0;
  std::uint64_t seed = 0;
  DecompositionParams params;
  NetHierarchy hierarchy;
  std::vector<Cluster> clusters;         // clusters[0] is the root
  std::vector<std::vector<int>> at;      // at[i][p] = cluster id at height i holding p
  std::vector<RadiusSample> radii;

  const Cluster& root() const { return clusters.front(); }
  const Cluster& operator[](int id) const { return clusters[static_cast<std::size_t>(id)]; }
  int cluster_of(int height, PointId p) const { return at[static_cast<std::size_t>(height)][p]; }
  std::size_t num_points() const { return at.empty() ? 0 : at[0].size(); }

  std::vector<int> clusters_at(int height) const {
    std::vector<int> out;
    for (const auto& c : clusters)
      if (c.height == height) out.push_back(c.id);
    return out;
  }

  // Lowest cluster containing both points.
  int lca(PointId x, PointId y) const {
    for (int h = 0; h < L; ++h)
      if (cluster_of(h, x) == cluster_of(h, y)) return cluster_of(h, x);
    return root().id;
  }

  // Child of cluster c holding p (p must be a member of c).
  int child_containing(int c, PointId p) const {
    const auto& cl = clusters[static_cast<std::size_t>(c)];
    return cluster_of(cl.height - 1, p);
  }

  // True when d is a strict descendant of a in the cluster tree.
  bool is_proper_descendant(int d, int a) const {
    for (int p = clusters[static_cast<std::size_t>(d)].parent; p >= 0; p = clusters[static_cast<std::size_t>(p)].parent)
      if (p == a) return true;
    return false;
  }
  bool is_descendant_or_self(int d, int a) const { return d == a || is_proper_descendant(d, a); }
};

// Inverse-CDF sample of the truncated exponential on [0, s^i] with rate ln(chi)/s^i.
inline long double truncated_exp_inverse(long double U, long double si, long double chi) {
  return -si * std::log(1.0L - U * (chi - 1.0L) / chi) / std::log(chi);
}

inline RadiusSample sample_radius(const MetricSpace& m, int s, int i, PointId u, double chi,
                                  std::mt19937_64& rng) {
  if (chi <= 1) throw InvalidArgument("chi must exceed 1");
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const long double si = static_cast<long double>(m.scale_pow(s, i));
  long double h = truncated_exp_inverse(U(rng), si, chi);
  Dist hs = static_cast<Dist>(std::floor(h));
  hs = std::clamp<Dist>(hs, 0, m.scale_pow(s, i));
  return {i, u, hs};
}

// Each point goes to the first net point (in the given order) whose ball
// B(u, s^i + h_u) contains it. Returns the index into `order` per point.
inline std::vector<int> build_single_scale(const MetricSpace& m, const std::vector<PointId>& order,
                                           const std::vector<Dist>& radius) {
  std::vector<int> assign(static_cast<std::size_t>(m.size()), -1);
  for (PointId p = 0; p < m.size(); ++p) {
    for (std::size_t j = 0; j < order.size(); ++j)
      if (m.dist(p, order[j]) <= radius[j]) {
        assign[p] = static_cast<int>(j);
        break;
      }
    if (assign[p] < 0) throw UncoveredPoint();
  }
  return assign;
}

// Portal net height: practical i - portal_drop; theory the largest i' with
// s^i' <= max(1, eps/(4 beta L) s^i).
inline int portal_height(int i, int s, int L, const DecompositionParams& p) {
  if (p.mode == Mode::practical) return std::max(0, i - p.portal_drop);
  const long double beta = p.c_cut * p.k;
  const long double t = std::max(1.0L, p.eps / (4.0L * beta * L) * std::pow(static_cast<long double>(s), i));
  int ip = 0;
  while (std::pow(static_cast<long double>(s), ip + 1) <= t) ++ip;
  return std::min(ip, i);
}

inline std::vector<PointId> compute_portals(const Cluster& c, const NetHierarchy& h, int s, int L,
                                            const DecompositionParams& p) {
  const int ip = portal_height(c.height, s, L, p);
  std::vector<PointId> out;
  for (PointId q : c.points)
    if (h.in_net(ip, q)) out.push_back(q);
  if (out.empty() || out.front() != c.points.front()) out.insert(out.begin(), c.points.front());
  return out;
}

inline const std::vector<PointId>& portals_of(const Decomposition& d, int cluster) {
  return d[cluster].portals;
}

// Random hierarchical decomposition: one single-scale partition per height
// 1..L-2 with pi_i = ascending id, root X at height L-1, singletons at 0.
inline Decomposition build_hierarchy_decomposition(const MetricSpace& m, const NetHierarchy& h,
                                                   std::mt19937_64& rng, const DecompositionParams& params = {}) {
  Decomposition d;
  d.s = h.s;
  d.L = h.L;
  d.params = params;
  d.chi = std::pow(2.0, params.k);
  d.hierarchy = h;
  const int n = m.size();
  const int L = h.L;
  d.at.assign(static_cast<std::size_t>(L), std::vector<int>(static_cast<std::size_t>(n), -1));

  // Single-scale partitions, labels per point.
  std::vector<std::vector<int>> label(static_cast<std::size_t>(L));
  std::vector<std::vector<PointId>> order(static_cast<std::size_t>(L));
  for (int i = 1; i <= L - 2; ++i) {
    order[i] = h.net(i);
    std::vector<Dist> r;
    for (PointId u : order[i]) {
      auto smp = sample_radius(m, h.s, i, u, d.chi, rng);
      d.radii.push_back(smp);
      r.push_back(m.scale_pow(h.s, i) + smp.h);
    }
    label[i] = build_single_scale(m, order[i], r);
  }

  auto make = [&](int height, PointId center, PointSet mem, int parent) {
    Cluster c;
    c.id = static_cast<int>(d.clusters.size());
    c.height = height;
    c.center = center;
    c.points = to_ids(mem);
    c.members = std::move(mem);
    c.parent = parent;
    for (PointId p : c.points) d.at[height][p] = c.id;
    d.clusters.push_back(std::move(c));
    if (parent >= 0) d.clusters[parent].children.push_back(d.clusters.back().id);
    return d.clusters.back().id;
  };

  PointSet all(static_cast<std::size_t>(n));
  all.set();
  make(L - 1, h.net(L - 1).front(), all, -1);
  for (int i = L - 2; i >= 0; --i) {
    for (int pid : d.clusters_at(i + 1)) {
      const auto pts = d.clusters[pid].points;
      if (i == 0) {
        for (PointId p : pts) {
          PointSet one(static_cast<std::size_t>(n));
          one.set(p);
          make(0, p, one, pid);
        }
        continue;
      }
      std::map<int, PointSet> parts;
      for (PointId p : pts) {
        auto& ps = parts[label[i][p]];
        if (ps.size() == 0) ps.resize(static_cast<std::size_t>(n));
        ps.set(p);
      }
      for (auto& [lab, ps] : parts) make(i, order[i][lab], ps, pid);
    }
  }
  for (auto& c : d.clusters) c.portals = compute_portals(c, h, d.s, L, params);
  return d;
}

// Endpoint inside every cluster crossed by an edge is a portal of that cluster.
inline bool is_portal_respecting(const Forest& f, const Decomposition& d) {
  for (auto [x, y] : f.edges())
    for (int h = 0; h < d.L; ++h) {
      int cx = d.cluster_of(h, x), cy = d.cluster_of(h, y);
      if (cx == cy) break;
      if (!d[cx].is_portal(x) || !d[cy].is_portal(y)) return false;
    }
  return true;
}

namespace detail {
inline void route_portal(const MetricSpace& m, const Decomposition& d, PointId x, PointId y, Forest& out) {
  if (x == y) return;
  const int c = d.lca(x, y);
  const int cx = d.child_containing(c, x), cy = d.child_containing(c, y);
  const PointId px = d[cx].is_portal(x) ? x : m.nearest(x, d[cx].portals);
  const PointId py = d[cy].is_portal(y) ? y : m.nearest(y, d[cy].portals);
  route_portal(m, d, x, px, out);
  out.add(px, py);
  route_portal(m, d, py, y, out);
}
}  // namespace detail

// Reroutes each edge x-y through the nearest portals of the two children of
// their lowest common cluster, recursively inside each child.
inline Forest make_portal_respecting(const Forest& f, const MetricSpace& m, const Decomposition& d) {
  Forest out;
  for (auto [x, y] : f.edges()) detail::route_portal(m, d, x, y, out);
  return out;
}

struct LightnessEntry {
  int cluster = 0;
  int portals_used = 0;
  int crossing_components = 0;
};

struct LightnessReport {
  std::vector<LightnessEntry> per_cluster;
  int max_portals_used = 0;
  int max_crossing_components = 0;
};

inline LightnessReport lightness_report(const Forest& f, const MetricSpace& m, const Decomposition& d) {
  if (!is_portal_respecting(f, d)) throw NotPortalRespecting();
  LightnessReport r;
  for (const auto& c : d.clusters) {
    LightnessEntry e{c.id, 0, 0};
    std::vector<PointId> used;
    for (auto [x, y] : f.edges()) {
      bool ix = c.contains(x), iy = c.contains(y);
      if (ix != iy) used.push_back(ix ? x : y);
    }
    std::sort(used.begin(), used.end());
    e.portals_used = static_cast<int>(std::unique(used.begin(), used.end()) - used.begin());
    e.crossing_components = static_cast<int>(crossing_components(f, m, c.members).size());
    r.max_portals_used = std::max(r.max_portals_used, e.portals_used);
    r.max_crossing_components = std::max(r.max_crossing_components, e.crossing_components);
    r.per_cluster.push_back(e);
  }
  return r;
}

// True iff the points of p are not all in one cluster of the labelling.
inline bool is_cut(const std::vector<int>& labels, const std::vector<PointId>& p) {
  for (PointId q : p)
    if (labels[q] != labels[p.front()]) return true;
  return false;
}

}  // namespace sfp
