#include "sfp/validation.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace sfp;

namespace {

enum Exit { kOk = 0, kFailed = 1, kUsage = 2 };

struct Common {
  std::uint64_t seed = 1;
  double eps = 0.5;
  int s = 4;
  double q0 = 0;
  int trials = 8;
  int r = practical_caps().r_cap;
  int rho = practical_caps().rho_cap;
  int edges = practical_caps().edge_cap;
  std::string mode = "practical";
  std::string out = "-";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--eps", c.eps, "accuracy parameter in (0,1)");
  app->add_option("--s", c.s, "scale base");
  app->add_option("--q0", c.q0, "critical threshold; 0 calibrates");
  app->add_option("--trials", c.trials, "decomposition trials per sparse node");
  app->add_option("--caps.r", c.r, "active portals per entry");
  app->add_option("--caps.rho", c.rho, "cells per entry");
  app->add_option("--caps.edges", c.edges, "portal graph edges per cluster");
  app->add_option("--mode", c.mode, "practical or theory")->check(CLI::IsMember({"practical", "theory"}));
  app->add_option("--out", c.out, "output path, - for stdout");
}

DriverConfig config_of(const Common& c) {
  DriverConfig d;
  d.seed = c.seed;
  d.eps = c.eps;
  d.s = c.s;
  d.q0 = c.q0;
  d.n_trials = c.trials;
  d.caps.r_cap = c.r;
  d.caps.rho_cap = c.rho;
  d.caps.edge_cap = c.edges;
  d.mode = parse_mode(c.mode);
  d.log = [](const std::string& s) { spdlog::debug("{}", s); };
  return d;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("sfp");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lv = std::getenv("SFP_LOG")) spdlog::set_level(spdlog::level::from_str(lv));
}

// Oracle cost when the instance is small enough; nullopt otherwise.
std::optional<Dist> oracle_cost(const InstanceFile& f, const std::string& policy) {
  if (policy == "never") return std::nullopt;
  const auto term = normalized(f.instance.pairs).terminals();
  if (policy == "auto" && (f.metric.size() > 16 || term.size() > 8)) return std::nullopt;
  try {
    return weight(brute_force_opt(f.metric, f.instance, default_candidates(f.metric, term)), f.metric);
  } catch (const BudgetExceeded& e) {
    spdlog::info("oracle skipped: {}", e.what());
    return std::nullopt;
  }
}

std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

struct Solved {
  Forest forest;
  Dist cost = 0;
  std::optional<AlgResult> alg;
};

Solved solve_with(const std::string& solver, const InstanceFile& f, const DriverConfig& c) {
  Solved s;
  if (solver == "oracle") {
    s.forest = brute_force_opt(f.metric, f.instance, default_candidates(f.metric, normalized(f.instance.pairs).terminals()));
  } else if (solver == "gw") {
    s.forest = gw_primal_dual(f.metric, normalized(f.instance.pairs));
  } else {
    s.alg = run_alg(f.metric, f.instance, c);
    s.forest = s.alg->forest;
  }
  s.cost = weight(s.forest, f.metric);
  return s;
}

int cmd_gen(const std::string& kind, int pairs, double spread, int extra, const Common& c) {
  GeneratorSpec spec{parse_generator_kind(kind), pairs, spread, c.seed, extra};
  write_text(c.out, instance_to_json(generate(spec)).dump(2) + "\n");
  return kOk;
}

int cmd_solve(const std::string& path, const std::string& solver, const std::string& oracle_policy, bool timing,
              const Common& c) {
  const auto f = instance_from_json(read_json_file(path));
  const auto cfg = config_of(c);
  validate(cfg);
  const auto s = solve_with(solver, f, cfg);
  const bool feasible = is_feasible(s.forest, f.instance, static_cast<std::size_t>(f.metric.size()));
  const Dist gw = weight(gw_primal_dual(f.metric, normalized(f.instance.pairs)), f.metric);
  auto rec = result_to_json(f.metric, s.cost, feasible, s.forest, oracle_cost(f, oracle_policy), gw, cfg,
                            s.alg ? &*s.alg : nullptr, timing);
  rec["solver"] = solver;
  write_text(c.out, rec.dump(2) + "\n");
  if (!feasible) spdlog::error("{} output is infeasible", solver);
  return feasible ? kOk : kFailed;
}

int cmd_compare(const std::vector<std::string>& files, int count, const std::string& kind, int pairs, double spread,
                int extra, const std::string& oracle_policy, const Common& c) {
  const auto cfg = config_of(c);
  validate(cfg);
  std::vector<std::pair<std::string, InstanceFile>> insts;
  for (const auto& p : files) insts.emplace_back(std::filesystem::path(p).stem().string(), instance_from_json(read_json_file(p)));
  for (int i = 0; i < count && files.empty(); ++i) {
    GeneratorSpec spec{parse_generator_kind(kind), pairs, spread, c.seed + static_cast<std::uint64_t>(i), extra};
    auto g = generate(spec);
    insts.emplace_back("gen-" + std::to_string(spec.seed), InstanceFile{g.metric, g.instance, static_cast<double>(g.dim_bound)});
  }
  std::ostringstream csv;
  csv << "instance_id,n_pairs,|X|,oracle_cost,gw_cost,ptas_cost,gw_ratio,ptas_ratio,seed\n";
  bool ok = true;
  for (const auto& [id, f] : insts) {
    spdlog::info("compare {}", id);
    const auto inst = normalized(f.instance.pairs);
    const auto opt = oracle_cost(f, oracle_policy);
    const auto gw = solve_with("gw", f, cfg);
    const auto pt = solve_with("ptas", f, cfg);
    ok = ok && pt.alg->feasible && is_feasible(gw.forest, inst, static_cast<std::size_t>(f.metric.size()));
    const auto& m = f.metric;
    auto opt_s = [&](Dist v) {
      const auto q = ratio(v, opt);
      return q ? fmt_num(*q) : std::string();
    };
    csv << id << ',' << inst.size() << ',' << m.size() << ',' << (opt ? fmt_num(m.to_units(*opt)) : "") << ','
        << fmt_num(m.to_units(gw.cost)) << ',' << fmt_num(m.to_units(pt.cost)) << ',' << opt_s(gw.cost)
        << ',' << opt_s(pt.cost) << ',' << c.seed << '\n';
  }
  write_text(c.out, csv.str());
  return ok ? kOk : kFailed;
}

int cmd_validate(const std::string& suite, int instances, int mc_trials, const Common& c) {
  SuiteOptions o;
  o.seed = c.seed;
  o.s = c.s;
  o.eps = c.eps;
  o.caps.r_cap = c.r;
  o.caps.rho_cap = c.rho;
  o.caps.edge_cap = c.edges;
  if (instances > 0) o.instances = instances;
  if (mc_trials > 0) o.mc_trials = mc_trials;
  const std::vector<std::string> names = suite == "all" ? suite_names() : std::vector<std::string>{suite};
  json out = json::array();
  bool ok = true;
  for (const auto& n : names) {
    SuiteOptions so = o;
    if (instances <= 0 && n == "cut-probability") so.instances = 10;
    if (instances <= 0 && n == "near-terminal") so.instances = 100;
    const auto rep = run_suite(n, so);
    spdlog::info("suite {}: {} checks, {} failures", n, rep.checked, rep.failures);
    ok = ok && rep.passed();
    json j{{"suite", n}, {"passed", rep.passed()}, {"checked", rep.checked}, {"failures", rep.failures}};
    for (auto& [k, v] : rep.details.items())
      if (k != "rows") j[k] = v;
    out.push_back(std::move(j));
  }
  write_text(c.out, out.dump(2) + "\n");
  return ok ? kOk : kFailed;
}

// Debug dump: one decomposition sample, its cells for the GW forest, and the
// DP statistics of a single run on it.
int cmd_inspect(const std::string& path, bool timing, const Common& c) {
  const auto f = instance_from_json(read_json_file(path));
  const auto cfg = config_of(c);
  validate(cfg);
  const auto inst = normalized(f.instance.pairs);
  const auto r = rescale_instance(f.metric, inst.pairs, cfg.eps);
  const auto h = build_hierarchy(r.metric, cfg.s, std::max(height_count(r.metric, cfg.s), 2));
  auto rng = detail::substream(cfg.seed, 0, 0, 0);
  const auto d = build_hierarchy_decomposition(r.metric, h, rng, cfg.decomposition());
  const auto cp = make_cell_params(cfg.eps, cfg.k, h.s, h.L);
  const auto rinst = normalized(r.pairs);
  DpContext ctx(r.metric, d, rinst, cfg.caps, cp);
  const auto dp = run_dp(ctx);
  json j;
  j["decomposition"] = decomposition_to_json(d);
  j["cells"] = cells_to_json(compute_cells(gw_primal_dual(r.metric, rinst), r.metric, d, cp));
  j["dp"] = dp_stats_to_json(dp.stats, timing);
  j["dp"]["value"] = dp.value >= kInf ? json(nullptr) : json(dp.value);
  write_text(c.out, j.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Steiner forest solvers for doubling metrics"};
  app.require_subcommand(1);
  Common c;

  auto* gen = app.add_subcommand("gen", "generate an instance");
  std::string kind = "euclidean2d";
  int pairs = 2, extra = 2;
  double spread = 20;
  gen->add_option("--kind", kind, "euclidean2d, euclidean3d, grid or clustered");
  gen->add_option("--pairs", pairs, "number of terminal pairs");
  gen->add_option("--spread", spread, "coordinate range");
  gen->add_option("--extra", extra, "non-terminal points");
  add_common(gen, c);

  auto* solve = app.add_subcommand("solve", "solve an instance file");
  std::string instance, solver = "ptas", oracle_policy = "auto";
  bool timing = false;
  solve->add_option("instance", instance, "instance JSON")->required();
  solve->add_option("--solver", solver)->check(CLI::IsMember({"oracle", "gw", "ptas"}));
  solve->add_option("--oracle", oracle_policy, "oracle ratio: auto, always or never")
      ->check(CLI::IsMember({"auto", "always", "never"}));
  solve->add_flag("--timing", timing, "include timing fields");
  add_common(solve, c);

  auto* compare = app.add_subcommand("compare", "ratio table of oracle, gw and ptas as CSV");
  std::vector<std::string> files;
  int count = 10;
  compare->add_option("instances", files, "instance files; generated when absent");
  compare->add_option("--count", count, "generated instances");
  compare->add_option("--kind", kind);
  compare->add_option("--pairs", pairs);
  compare->add_option("--spread", spread);
  compare->add_option("--extra", extra);
  compare->add_option("--oracle", oracle_policy)->check(CLI::IsMember({"auto", "always", "never"}));
  add_common(compare, c);

  auto* val = app.add_subcommand("validate", "run invariant suites");
  std::string suite = "all";
  int instances = 0, mc = 0;
  std::vector<std::string> choices = suite_names();
  choices.push_back("all");
  val->add_option("--suite", suite)->check(CLI::IsMember(choices));
  val->add_option("--instances", instances, "instances per suite");
  val->add_option("--mc-trials", mc, "partitions per set in the cut suite");
  add_common(val, c);

  auto* inspect = app.add_subcommand("inspect", "dump a decomposition, its cells and DP statistics");
  inspect->add_option("instance", instance, "instance JSON")->required();
  inspect->add_flag("--timing", timing, "include per-height timing");
  add_common(inspect, c);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen(kind, pairs, spread, extra, c);
    if (*solve) return cmd_solve(instance, solver, oracle_policy, timing, c);
    if (*compare) return cmd_compare(files, count, kind, pairs, spread, extra, oracle_policy, c);
    if (*val) return cmd_validate(suite, instances, mc, c);
    if (*inspect) return cmd_inspect(instance, timing, c);
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kFailed;
  }
  return kUsage;
}
