#pragma once

#include "sfp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace sfp {

enum class GeneratorKind { euclidean2d, euclidean3d, grid, clustered };

inline std::string to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::euclidean2d: return "euclidean2d";
    case GeneratorKind::euclidean3d: return "euclidean3d";
    case GeneratorKind::grid: return "grid";
    case GeneratorKind::clustered: return "clustered";
  }
  return "?";
}

inline GeneratorKind parse_generator_kind(const std::string& s) {
  if (s == "euclidean2d") return GeneratorKind::euclidean2d;
  if (s == "euclidean3d") return GeneratorKind::euclidean3d;
  if (s == "grid") return GeneratorKind::grid;
  if (s == "clustered") return GeneratorKind::clustered;
  throw InvalidArgument("unknown generator kind: " + s);
}

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::euclidean2d;
  int n_pairs = 1;
  double spread = 10.0;
  std::uint64_t seed = 1;
  int extra_points = 0;  // non-terminal points available as Steiner points
};

struct Generated {
  MetricSpace metric;
  SfpInstance instance;
  int dim_bound = 2;
};

// Coordinates are rounded to 1e-3 units so instance files round-trip exactly.
inline Generated generate(const GeneratorSpec& spec) {
  if (spec.n_pairs < 1 || spec.spread <= 0) throw InvalidArgument("invalid generator spec");
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  auto q = [](double v) { return std::round(v * 1000.0) / 1000.0; };
  std::vector<std::vector<double>> pts;
  std::vector<TerminalPair> pairs;
  int dim = 2;
  const int nt = 2 * spec.n_pairs;

  switch (spec.kind) {
    case GeneratorKind::euclidean2d:
    case GeneratorKind::euclidean3d: {
      dim = spec.kind == GeneratorKind::euclidean2d ? 2 : 3;
      for (int i = 0; i < nt + spec.extra_points; ++i) {
        std::vector<double> p;
        for (int c = 0; c < dim; ++c) p.push_back(q(U(rng) * spec.spread));
        pts.push_back(std::move(p));
      }
      for (int i = 0; i < spec.n_pairs; ++i) pairs.push_back({2 * i, 2 * i + 1});
      break;
    }
    case GeneratorKind::grid: {
      int side = std::max(2, static_cast<int>(std::lround(spec.spread)));
      while (side * side < nt) ++side;
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
      std::vector<PointId> ids(pts.size());
      std::iota(ids.begin(), ids.end(), 0);
      std::shuffle(ids.begin(), ids.end(), rng);
      for (int i = 0; i < spec.n_pairs; ++i) pairs.push_back({ids[2 * i], ids[2 * i + 1]});
      break;
    }
    case GeneratorKind::clustered: {
      const double r = std::max(1.0, spec.spread / 20.0);
      const int per = spec.n_pairs + (spec.extra_points + 1) / 2;
      for (int c = 0; c < 2; ++c)
        for (int i = 0; i < per; ++i) {
          double ang = U(rng) * 2 * M_PI, rad = r * std::sqrt(U(rng));
          pts.push_back({q(c * spec.spread + rad * std::cos(ang)), q(rad * std::sin(ang))});
        }
      for (int i = 0; i < spec.n_pairs; ++i) pairs.push_back({i, per + i});
      break;
    }
  }
  Generated g;
  g.metric = build_metric_from_points(pts);
  g.instance.pairs = pairs;
  g.dim_bound = dim;
  return g;
}

}  // namespace sfp
