#pragma once

#include "sfp/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

namespace sfp {

struct TerminalPair {
  PointId a = 0;
  PointId b = 0;
  friend bool operator==(const TerminalPair&, const TerminalPair&) = default;
  friend auto operator<=>(const TerminalPair&, const TerminalPair&) = default;
};

// Finite metric with scaled-integer distances. `unit` is the scaled value of
// one user-facing distance unit.
class MetricSpace {
 public:
  MetricSpace() = default;
  MetricSpace(int n, std::vector<Dist> d, Dist unit = kDefaultScale)
      : n_(n), d_(std::move(d)), unit_(unit) {}

  int size() const { return n_; }
  Dist unit() const { return unit_; }
  Dist dist(PointId a, PointId b) const {
    return d_[static_cast<std::size_t>(a) * n_ + b];
  }
  double to_units(Dist v) const { return static_cast<double>(v) / unit_; }

  const std::vector<std::vector<double>>& coords() const { return coords_; }
  void set_coords(std::vector<std::vector<double>> c) { coords_ = std::move(c); }

  Dist diameter() const {
    Dist m = 0;
    for (Dist v : d_) m = std::max(m, v);
    return m;
  }

  Dist diameter(const std::vector<PointId>& s) const {
    Dist m = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t j = i + 1; j < s.size(); ++j) m = std::max(m, dist(s[i], s[j]));
    return m;
  }

  Dist min_nonzero() const {
    Dist m = kInf;
    for (Dist v : d_)
      if (v > 0) m = std::min(m, v);
    return m;
  }

  // Distance from p to a set; kInf when the set is empty.
  Dist dist_to(PointId p, const std::vector<PointId>& s) const {
    Dist m = kInf;
    for (PointId q : s) m = std::min(m, dist(p, q));
    return m;
  }

  // Nearest member of s to p, ties by smaller id.
  PointId nearest(PointId p, const std::vector<PointId>& s) const {
    PointId best = -1;
    Dist bd = kInf;
    for (PointId q : s) {
      Dist v = dist(p, q);
      if (v < bd || (v == bd && q < best)) {
        bd = v;
        best = q;
      }
    }
    return best;
  }

  // unit * s^i, saturating.
  Dist scale_pow(int s, int i) const { return sat_mul(unit_, sat_pow(s, i)); }

  const std::vector<Dist>& raw() const { return d_; }

 private:
  int n_ = 0;
  std::vector<Dist> d_;
  Dist unit_ = kDefaultScale;
  std::vector<std::vector<double>> coords_;
};

struct Ball {
  PointId center = 0;
  Dist radius = 0;
  bool contains(const MetricSpace& m, PointId p) const {
    return m.dist(center, p) <= radius;
  }
};

inline void verify_metric(const MetricSpace& m) {
  const int n = m.size();
  for (int x = 0; x < n; ++x) {
    if (m.dist(x, x) != 0) throw InvalidArgument("nonzero self distance");
    for (int y = 0; y < n; ++y) {
      if (m.dist(x, y) < 0) throw NegativeDistance();
      if (m.dist(x, y) != m.dist(y, x)) throw InvalidArgument("asymmetric distance matrix");
    }
  }
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      for (int z = 0; z < n; ++z)
        if (m.dist(x, z) > m.dist(x, y) + m.dist(y, z))
          throw TriangleViolation("triangle inequality fails at (" + std::to_string(x) + "," +
                                  std::to_string(y) + "," + std::to_string(z) + ")");
}

inline Dist scaled_ceil(double v, Dist unit) {
  if (v < 0) throw NegativeDistance();
  long double x = static_cast<long double>(v) * unit;
  return static_cast<Dist>(std::ceil(x - 1e-6L));
}

inline MetricSpace build_metric_from_points(const std::vector<std::vector<double>>& pts,
                                            Dist unit = kDefaultScale) {
  const int n = static_cast<int>(pts.size());
  std::vector<Dist> d(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (pts[i].size() != pts[j].size()) throw InvalidArgument("mixed coordinate dimensions");
      long double s = 0;
      for (std::size_t c = 0; c < pts[i].size(); ++c) {
        long double t = static_cast<long double>(pts[i][c]) - pts[j][c];
        s += t * t;
      }
      Dist v = scaled_ceil(static_cast<double>(std::sqrt(s)), unit);
      d[static_cast<std::size_t>(i) * n + j] = v;
      d[static_cast<std::size_t>(j) * n + i] = v;
    }
  MetricSpace m(n, std::move(d), unit);
  m.set_coords(pts);
  verify_metric(m);
  return m;
}

inline MetricSpace build_metric_from_matrix(const std::vector<std::vector<double>>& mat,
                                            Dist unit = kDefaultScale) {
  const int n = static_cast<int>(mat.size());
  std::vector<Dist> d(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(mat[i].size()) != n) throw InvalidArgument("matrix is not square");
    for (int j = 0; j < n; ++j) {
      if (mat[i][j] < 0) throw NegativeDistance();
      d[static_cast<std::size_t>(i) * n + j] = i == j ? 0 : scaled_ceil(mat[i][j], unit);
    }
  }
  MetricSpace m(n, std::move(d), unit);
  verify_metric(m);
  return m;
}

inline MetricSpace build_metric_scaled(const std::vector<std::vector<Dist>>& mat,
                                       Dist unit = kDefaultScale) {
  const int n = static_cast<int>(mat.size());
  std::vector<Dist> d;
  d.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& row : mat) {
    if (static_cast<int>(row.size()) != n) throw InvalidArgument("matrix is not square");
    d.insert(d.end(), row.begin(), row.end());
  }
  MetricSpace m(n, std::move(d), unit);
  verify_metric(m);
  return m;
}

// Greedy rho-net of z: scan in ascending id, keep a point unless some kept
// point is within rho.
inline std::vector<PointId> greedy_net(const MetricSpace& m, std::vector<PointId> z, Dist rho,
                                       std::vector<PointId> seed = {}) {
  std::sort(z.begin(), z.end());
  std::vector<PointId> net = std::move(seed);
  for (PointId p : z) {
    bool covered = false;
    for (PointId q : net)
      if (m.dist(p, q) <= rho) {
        covered = true;
        break;
      }
    if (!covered) net.push_back(p);
  }
  std::sort(net.begin(), net.end());
  return net;
}

inline std::vector<PointId> all_points(const MetricSpace& m) {
  std::vector<PointId> v(static_cast<std::size_t>(m.size()));
  for (int i = 0; i < m.size(); ++i) v[i] = i;
  return v;
}

struct NetHierarchy {
  int s = 4;
  int L = 1;
  std::vector<std::vector<PointId>> nets;  // nets[i] = N_i, i = 0..L
  std::vector<PointSet> member;

  const std::vector<PointId>& net(int i) const {
    if (i <= 0) return nets.front();
    if (i >= static_cast<int>(nets.size())) return nets.back();
    return nets[i];
  }
  bool in_net(int i, PointId p) const {
    if (i <= 0) return true;
    if (i >= static_cast<int>(member.size())) return member.back().test(p);
    return member[i].test(p);
  }
};

// Smallest L >= 1 with s^(L-1) >= Diam(X).
inline int height_count(const MetricSpace& m, int s) {
  const Dist diam = m.diameter();
  int L = 1;
  while (m.scale_pow(s, L - 1) < diam) ++L;
  return L;
}

// Nested nets built top-down: N_L is a greedy s^L-net of X, and N_i extends
// N_{i+1} greedily over X. Every N_i is then an s^i-packing and s^i-cover of X.
inline NetHierarchy build_hierarchy(const MetricSpace& m, int s, int L) {
  if (s < 2) throw InvalidArgument("s must be >= 2");
  if (L < 1) throw InvalidArgument("L must be >= 1");
  NetHierarchy h;
  h.s = s;
  h.L = L;
  h.nets.assign(static_cast<std::size_t>(L) + 1, {});
  const auto x = all_points(m);
  h.nets[L] = greedy_net(m, x, m.scale_pow(s, L));
  for (int i = L - 1; i >= 1; --i) h.nets[i] = greedy_net(m, x, m.scale_pow(s, i), h.nets[i + 1]);
  h.nets[0] = x;
  for (const auto& n : h.nets) h.member.push_back(from_ids(static_cast<std::size_t>(m.size()), n));
  return h;
}

inline bool verify_packing_cover(const MetricSpace& m, const std::vector<PointId>& s,
                                 const std::vector<PointId>& z, Dist rho,
                                 std::optional<double> k = std::nullopt) {
  if (s.empty()) return z.empty();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      if (m.dist(s[i], s[j]) <= rho) return false;
  for (PointId p : z)
    if (m.dist_to(p, s) > rho) return false;
  if (k && s.size() > 1) {
    double bound = std::pow(2.0 * static_cast<double>(m.diameter(s)) / static_cast<double>(rho), *k);
    if (static_cast<double>(s.size()) > bound) return false;
  }
  return true;
}

struct RescaleResult {
  MetricSpace metric;
  std::vector<TerminalPair> pairs;     // over new ids
  std::vector<PointId> to_original;    // new id -> original id
  std::vector<PointId> snap;           // original id -> new id of its net point
  Dist net_radius = 0;
  Dist cap = 0;
  Dist factor = 1;
};

// Snap to an eps*R/(32 n^2)-net, cap distances at n*R, and multiply by an
// integer so that the smallest nonzero distance is at least one unit.
inline RescaleResult rescale_instance(const MetricSpace& m, const std::vector<TerminalPair>& pairs,
                                      double eps) {
  if (pairs.empty()) throw EmptyInstance();
  Dist R = 0;
  for (const auto& p : pairs) R = std::max(R, m.dist(p.a, p.b));
  if (R == 0) throw DegenerateInstance("all terminal pairs are coincident");
  const auto n = static_cast<long double>(pairs.size());
  RescaleResult out;
  out.net_radius = static_cast<Dist>(std::floor(eps * static_cast<long double>(R) / (32.0L * n * n)));
  const auto net = greedy_net(m, all_points(m), out.net_radius);
  std::vector<PointId> new_id(static_cast<std::size_t>(m.size()), -1);
  for (std::size_t i = 0; i < net.size(); ++i) new_id[net[i]] = static_cast<PointId>(i);
  out.to_original = net;
  out.snap.resize(static_cast<std::size_t>(m.size()));
  for (int p = 0; p < m.size(); ++p) out.snap[p] = new_id[m.nearest(p, net)];

  out.cap = sat_mul(static_cast<Dist>(pairs.size()), R);
  const int k = static_cast<int>(net.size());
  std::vector<Dist> d(static_cast<std::size_t>(k) * k, 0);
  Dist min_nz = kInf;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      Dist v = std::min(m.dist(net[i], net[j]), out.cap);
      d[static_cast<std::size_t>(i) * k + j] = v;
      if (v > 0) min_nz = std::min(min_nz, v);
    }
  if (min_nz < m.unit()) out.factor = (m.unit() + min_nz - 1) / min_nz;
  if (out.factor > 1)
    for (Dist& v : d) v = sat_mul(v, out.factor);
  out.metric = MetricSpace(k, std::move(d), m.unit());
  for (const auto& p : pairs) out.pairs.push_back({out.snap[p.a], out.snap[p.b]});
  return out;
}

}  // namespace sfp
