#pragma once

// JSON (de)serialization for instances, forests, decompositions, cell
// assignments, DP statistics and the solver result record. Distances in
// files are user units; the library works in scaled integers (unit = 1e6).

#include "sfp/driver.hpp"
#include "sfp/generate.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <sstream>
#include <string>

namespace sfp {

using json = nlohmann::ordered_json;

struct InstanceFile {
  MetricSpace metric;
  SfpInstance instance;
  double dim_bound = 2;
};

inline json instance_to_json(const MetricSpace& m, const SfpInstance& inst, double dim_bound) {
  json j;
  if (!m.coords().empty()) {
    j["points"] = m.coords();
  } else {
    json mat = json::array();
    for (PointId a = 0; a < m.size(); ++a) {
      json row = json::array();
      for (PointId b = 0; b < m.size(); ++b) row.push_back(m.to_units(m.dist(a, b)));
      mat.push_back(std::move(row));
    }
    j["matrix"] = std::move(mat);
  }
  json pairs = json::array();
  for (auto p : inst.pairs) pairs.push_back({p.a, p.b});
  j["pairs"] = std::move(pairs);
  j["dim_bound"] = dim_bound;
  return j;
}

inline json instance_to_json(const Generated& g) { return instance_to_json(g.metric, g.instance, g.dim_bound); }

inline InstanceFile instance_from_json(const json& j) {
  InstanceFile f;
  try {
    if (j.contains("points") == j.contains("matrix"))
      throw InvalidArgument("instance needs exactly one of \"points\" or \"matrix\"");
    if (j.contains("points"))
      f.metric = build_metric_from_points(j.at("points").get<std::vector<std::vector<double>>>());
    else
      f.metric = build_metric_from_matrix(j.at("matrix").get<std::vector<std::vector<double>>>());
    for (const auto& p : j.at("pairs")) {
      if (p.size() != 2) throw InvalidArgument("pair must have two entries");
      TerminalPair tp{p[0].get<PointId>(), p[1].get<PointId>()};
      if (tp.a < 0 || tp.b < 0 || tp.a >= f.metric.size() || tp.b >= f.metric.size())
        throw InvalidArgument("pair references an unknown point");
      f.instance.pairs.push_back(tp);
    }
    f.dim_bound = j.value("dim_bound", 2.0);
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed instance: ") + e.what());
  }
  return f;
}

inline json forest_to_json(const Forest& f) {
  json edges = json::array();
  for (auto [a, b] : f.edges()) edges.push_back({a, b});
  return json{{"edges", std::move(edges)}};
}

// Weights are not stored; they come from the metric.
inline Forest forest_from_json(const json& j, const MetricSpace& m) {
  Forest f;
  for (const auto& e : j.at("edges")) {
    const PointId a = e.at(0).get<PointId>(), b = e.at(1).get<PointId>();
    if (a < 0 || b < 0 || a >= m.size() || b >= m.size()) throw InvalidArgument("edge references an unknown point");
    f.add(a, b);
  }
  return f;
}

inline json decomposition_to_json(const Decomposition& d) {
  json j;
  j["s"] = d.s;
  j["L"] = d.L;
  json heights = json::array();
  for (int i = d.L - 1; i >= 0; --i) {
    json cl = json::array();
    for (int c : d.clusters_at(i)) {
      const auto& x = d[c];
      cl.push_back({{"id", x.id}, {"center", x.center}, {"parent", x.parent}, {"points", x.points}, {"portals", x.portals}});
    }
    heights.push_back({{"height", i}, {"clusters", std::move(cl)}});
  }
  j["heights"] = std::move(heights);
  return j;
}

inline json cells_to_json(const CellAssignment& a) {
  json j = json::object();
  for (std::size_t c = 0; c < a.bas.size(); ++c) {
    json owner = json::object();
    for (auto [cell, comp] : a.owner[c]) owner[std::to_string(cell)] = comp;
    j[std::to_string(c)] = {{"bas", a.bas[c]}, {"pro", a.pro[c]},   {"vir", a.vir[c]},
                            {"nbas", a.nbas[c]}, {"eff", a.eff[c]}, {"owner", std::move(owner)}};
  }
  return j;
}

inline json caps_to_json(const CapCounters& c) {
  return {{"exceeded", c.any()}, {"r", c.r},           {"rho", c.rho},       {"edges", c.edges},
          {"supernodes", c.supernodes}, {"combos", c.combos}, {"entries", c.entries}};
}

inline json dp_stats_to_json(const DpStats& s, bool timing) {
  std::size_t total = 0;
  for (auto e : s.entries) total += e;
  json j{{"entries", total},  {"combos", s.combos}, {"partitions", s.partitions}, {"tuples", s.tuples},
         {"verify_failures", s.verify_failures}, {"caps", caps_to_json(s.caps)}};
  if (timing) j["ms_per_height"] = s.ms_per_height;
  return j;
}

inline json config_to_json(const DriverConfig& c) {
  return {{"eps", c.eps},
          {"k", c.k},
          {"s", c.s},
          {"L", c.L},
          {"q0", c.q0},
          {"q0_factor", c.q0_factor},
          {"trials", c.n_trials},
          {"mode", to_string(c.mode)},
          {"base_case_size", c.base_case_size},
          {"caps",
           {{"r", c.caps.r_cap},
            {"rho", c.caps.rho_cap},
            {"edges", c.caps.edge_cap},
            {"supernodes", c.caps.max_supernodes},
            {"combos", c.caps.max_combos},
            {"entries", c.caps.max_entries},
            {"verify", c.caps.verify}}}};
}

inline std::optional<double> ratio(Dist num, std::optional<Dist> den) {
  if (!den) return std::nullopt;
  if (*den == 0) return num == 0 ? std::optional<double>(1.0) : std::nullopt;
  return static_cast<double>(num) / static_cast<double>(*den);
}

inline json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

// Result record of one solver run. Timing fields only appear when asked
// for, so two runs with the same seed and config serialize identically.
inline json result_to_json(const MetricSpace& m, Dist cost, bool feasible, const Forest& forest,
                           std::optional<Dist> oracle, Dist gw, const DriverConfig& c, const AlgResult* alg,
                           bool timing) {
  json j;
  j["cost"] = m.to_units(cost);
  j["cost_scaled"] = cost;
  j["feasible"] = feasible;
  j["ratio_vs_oracle"] = nullable(ratio(cost, oracle));
  j["ratio_vs_gw"] = nullable(ratio(cost, std::optional<Dist>(gw)));
  j["recursion_nodes"] = alg ? alg->stats.recursion_nodes : 0;
  j["trials"] = c.n_trials;
  j["seed"] = c.seed;
  j["config"] = config_to_json(c);
  j["forest"] = forest_to_json(forest)["edges"];
  if (alg) {
    const auto& st = alg->stats;
    json trials = json::array();
    for (const auto& t : st.trials) {
      json tj{{"node", t.node},
              {"trial", t.trial},
              {"value", t.value >= kInf ? json(nullptr) : json(t.value)},
              {"entries", t.entries},
              {"tuples", t.tuples},
              {"partitions", t.partitions},
              {"verify_failures", t.verify_failures},
              {"reused", t.reused},
              {"caps", caps_to_json(t.caps)}};
      if (timing) tj["timing"] = {{"ms", t.ms}, {"ms_per_height", t.ms_per_height}};
      trials.push_back(std::move(tj));
    }
    json nodes = json::array();
    for (const auto& n : st.nodes)
      nodes.push_back({{"id", n.id}, {"depth", n.depth}, {"pairs", n.pairs}, {"kind", n.kind},
                       {"i", n.i},   {"u", n.u},         {"lambda", n.lambda}, {"h", n.h}});
    j["alg"] = {{"L", alg->L},
                {"s", alg->s},
                {"q0", alg->q0},
                {"max_depth", st.max_depth},
                {"dp_runs", st.dp_runs},
                {"dp_infinite", st.dp_infinite},
                {"fallback_used", st.fallback_used},
                {"depth_capped", st.depth_capped},
                {"caps", caps_to_json(st.caps)},
                {"nodes", std::move(nodes)},
                {"dp_trials", std::move(trials)}};
    if (alg->theory)
      j["alg"]["theory"] = {{"s", alg->theory->s}, {"q0", alg->theory->q0}, {"m", alg->theory->m}, {"r", alg->theory->r}};
  }
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path);
  out << text;
}

}  // namespace sfp
