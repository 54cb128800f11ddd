#pragma once

#include "sfp/forest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace sfp {

struct SfpInstance {
  std::vector<TerminalPair> pairs;

  bool empty() const { return pairs.empty(); }
  std::size_t size() const { return pairs.size(); }

  std::vector<PointId> terminals() const {
    std::set<PointId> t;
    for (const auto& p : pairs) {
      t.insert(p.a);
      t.insert(p.b);
    }
    return {t.begin(), t.end()};
  }

  friend bool operator==(const SfpInstance&, const SfpInstance&) = default;
};

// Drops trivial pairs and duplicates (as unordered pairs); result sorted.
inline SfpInstance normalized(const std::vector<TerminalPair>& pairs) {
  std::set<TerminalPair> s;
  for (auto p : pairs) {
    if (p.a == p.b) continue;
    if (p.a > p.b) std::swap(p.a, p.b);
    s.insert(p);
  }
  return {{s.begin(), s.end()}};
}

inline bool is_feasible(const Forest& f, const SfpInstance& inst, std::size_t n) {
  UnionFind uf = connectivity(f, n);
  for (const auto& p : inst.pairs)
    if (p.a != p.b && !uf.same(p.a, p.b)) return false;
  return true;
}

struct AuxParams {
  int i = 0;
  PointId u = 0;
  double t = 1.0;
  double delta = 0.1;
};

namespace detail {
inline bool within(const MetricSpace& m, PointId u, PointId p, long double radius_units) {
  return static_cast<long double>(m.dist(u, p)) <= radius_units * m.unit();
}

inline long double spow(int s, int i) { return std::pow(static_cast<long double>(s), i); }
}  // namespace detail

// j with s^j < delta s^i <= s^(j+1).
inline int aux_net_height(int s, int i, double delta) {
  const long double x = delta * detail::spow(s, i);
  if (x <= 1.0L) throw HeightUnderflow("delta * s^i <= 1");
  int j = 0;
  while (detail::spow(s, j + 1) < x) ++j;
  return j;
}

// j with s^j <= delta s^i < s^(j+1).
inline int split_net_height(int s, int i, double delta) {
  const long double x = delta * detail::spow(s, i);
  if (x < 1.0L) throw HeightUnderflow("delta * s^i < 1");
  int j = 0;
  while (detail::spow(s, j + 1) <= x) ++j;
  return j;
}

// Pairs induced by the ball B(u, t s^i): kept when inside or within the
// delta margin, bridged to a nearby net point when the partner is far, dropped
// when both ends are outside.
inline SfpInstance auxiliary_subinstance(const MetricSpace& m, const NetHierarchy& h,
                                         const SfpInstance& inst, const AuxParams& p) {
  if (p.t < 1 || p.delta <= 0 || p.delta >= 1) throw InvalidArgument("invalid AuxParams");
  if (!h.in_net(p.i, p.u)) throw InvalidArgument("u is not in N_i");
  const long double si = detail::spow(h.s, p.i);
  const long double r_in = p.t * si, r_out = (p.t + p.delta) * si;
  int j = -1;
  std::vector<TerminalPair> out;
  for (const auto& pr : inst.pairs) {
    bool a_in = detail::within(m, p.u, pr.a, r_in), b_in = detail::within(m, p.u, pr.b, r_in);
    if (!a_in && !b_in) continue;
    if (a_in && b_in) {
      out.push_back(pr);
      continue;
    }
    PointId in = a_in ? pr.a : pr.b, other = a_in ? pr.b : pr.a;
    if (detail::within(m, p.u, other, r_out)) {
      out.push_back(pr);
      continue;
    }
    if (j < 0) j = aux_net_height(h.s, p.i, p.delta);
    out.push_back({in, m.nearest(in, h.net(j))});
  }
  return normalized(out);
}

struct SplitResult {
  SfpInstance i1;
  SfpInstance i2;
  int j = -1;  // net height used for bridging points, -1 if unused
};

// Cutting ball B = B(u,(4+2 lambda+h) s^i) with margin delta s^i.
inline SplitResult split_critical(const MetricSpace& m, const NetHierarchy& h, const SfpInstance& inst,
                                  int i, PointId u, int lambda, double hh, double delta) {
  if (!h.in_net(i, u)) throw InvalidArgument("u is not in N_i");
  if (hh < 0 || hh > 0.5 || lambda < 0) throw InvalidArgument("invalid split parameters");
  const long double si = detail::spow(h.s, i);
  const long double r_in = (4.0L + 2.0L * lambda + hh) * si, r_out = r_in + delta * si;
  SplitResult res;
  std::vector<TerminalPair> o1, o2;
  for (const auto& pr : inst.pairs) {
    bool a_in = detail::within(m, u, pr.a, r_in), b_in = detail::within(m, u, pr.b, r_in);
    if (!a_in && !b_in) {
      o2.push_back(pr);
      continue;
    }
    PointId in = a_in ? pr.a : pr.b, other = a_in ? pr.b : pr.a;
    if (detail::within(m, u, other, r_out)) {
      o1.push_back(pr);
      continue;
    }
    if (res.j < 0) res.j = split_net_height(h.s, i, delta);
    PointId ap = m.nearest(in, h.net(res.j));
    o1.push_back({in, ap});
    o2.push_back({ap, other});
  }
  res.i1 = normalized(o1);
  res.i2 = normalized(o2);
  return res;
}

}  // namespace sfp
