#pragma once

// Command-line workflows. Machine-readable JSON goes to `out`, human text to
// `err`. Exit codes: 0 success, 1 infeasible or failed check, 2 usage/parse
// error.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairedge/error.hpp"
#include "fairedge/exitpolicy.hpp"
#include "fairedge/fairopt.hpp"
#include "fairedge/link.hpp"
#include "fairedge/oracle.hpp"
#include "fairedge/scenario.hpp"
#include "fairedge/trace.hpp"

namespace fairedge::cli {

enum ExitCode : int { kSuccess = 0, kFailed = 1, kUsage = 2 };

namespace fs = std::filesystem;

struct GenOptions {
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string config;  // materialize traces of an existing scenario
  std::size_t users = 3;
  std::size_t nodes = 2;
  int levels = 2;
  std::size_t events = 60;
  std::size_t layers = 4;
  bool deterministic = false;
};

struct SolveCliOptions {
  std::string scenario;
  std::string out;
  std::string mode = "exhaustive";
  bool deterministic = false;
};

struct VerifyOptions {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string suite = "all";
  std::string mode = "exhaustive";
};

struct SweepOptions {
  std::string trace;
  std::size_t grid = 19;
  std::string out;
};

namespace detail {

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline AssignmentMode parse_mode(const std::string& mode) {
  if (mode == "exhaustive") return AssignmentMode::exhaustive;
  if (mode == "local") return AssignmentMode::local;
  throw InvalidInputError("--mode must be exhaustive or local");
}

inline std::pair<ScenarioConfig, Scenario> load_scenario(const std::string& path) {
  auto cfg = load_scenario_config(path);
  auto scenario = build_scenario(cfg, fs::path(path).parent_path());
  return {std::move(cfg), std::move(scenario)};
}

inline json bound_summary(const BoundResult& b) {
  return {{"value", std::isfinite(b.value) ? json(b.value) : json(nullptr)},
          {"feasible", b.feasible},
          {"notes", b.notes}};
}

}  // namespace detail

// Writes <out>/scenario.json whose traces point at <out>/traces/ue_<i>.csv.
inline int cmd_gen(const GenOptions& opt, std::ostream& out, std::ostream& err) {
  ScenarioConfig cfg;
  if (!opt.config.empty()) {
    cfg = load_scenario_config(opt.config);
  } else {
    RandomScenarioParams params;
    params.users = opt.users;
    params.nodes = opt.nodes;
    params.security_levels = opt.levels;
    params.events_per_user = opt.events;
    params.layer_count = opt.layers;
    cfg = random_scenario(params, opt.seed);
  }
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir / "traces");
  const auto base = opt.config.empty() ? fs::path() : fs::path(opt.config).parent_path();
  const auto scenario = build_scenario(cfg, base);

  json traces = json::array();
  for (std::size_t i = 0; i < cfg.ues.size(); ++i) {
    const std::string rel = "traces/ue_" + std::to_string(i) + ".csv";
    save_stream(*scenario.ues[i].stream, dir / rel);
    cfg.ues[i].trace = TraceSource{rel, std::nullopt, 0};
    traces.push_back(rel);
  }
  save_scenario_config(cfg, dir / "scenario.json");
  err << "gen: wrote " << (dir / "scenario.json").string() << " with " << cfg.ues.size() << " users, "
      << cfg.ens.size() << " nodes\n";
  out << json{{"scenario_file", "scenario.json"}, {"trace_files", traces}, {"config_digest", config_digest(cfg)}}.dump()
      << '\n';
  return kSuccess;
}

inline int cmd_solve(const SolveCliOptions& opt, std::ostream& out, std::ostream& err) {
  auto [cfg, scenario] = detail::load_scenario(opt.scenario);
  SolveOptions so;
  so.mode = detail::parse_mode(opt.mode);
  try {
    auto result = solve_alternating(scenario, so);
    ResultBundle bundle{cfg, config_digest(cfg), result.plan, result.report, std::nullopt};
    if (!opt.deterministic) bundle.generated_at = detail::utc_now();
    const auto doc = bundle_to_json(bundle);
    if (!opt.out.empty()) write_bundle(bundle, opt.out);
    const auto& r = result.report;
    err << "solve: objective " << r.objective << " after " << r.iterations << " rounds, "
        << (r.feasible ? "feasible" : "INFEASIBLE") << '\n';
    out << json{{"status", r.feasible ? "ok" : "infeasible"},
                {"objective", r.objective},
                {"iterations", r.iterations},
                {"per_user_utility", r.per_user_utility},
                {"lower_bound", detail::bound_summary(r.lower)},
                {"upper_bound", detail::bound_summary(r.upper)},
                {"relative_gap_pct", doc["report"]["relative_gap_pct"]},
                {"config_digest", bundle.config_digest}}
               .dump()
        << '\n';
    return r.feasible ? kSuccess : kFailed;
  } catch (const InfeasibleScenarioError& e) {
    err << "solve: " << e.what() << '\n';
    out << json{{"status", "infeasible"}, {"cause", e.what()}, {"blocking_users", e.blocking_users()}}.dump() << '\n';
    return kFailed;
  }
}

inline int cmd_bounds(const SolveCliOptions& opt, std::ostream& out, std::ostream& err) {
  auto [cfg, scenario] = detail::load_scenario(opt.scenario);
  validate_scenario(scenario);
  const auto models = build_user_models(scenario);
  const auto lb = lower_bound(scenario, models);
  const auto ub = upper_bound(scenario, models);
  json doc{{"lower_bound", detail::bound_summary(lb)}, {"upper_bound", detail::bound_summary(ub)}};
  int code = kSuccess;
  try {
    SolveOptions so;
    so.mode = detail::parse_mode(opt.mode);
    const auto result = solve_alternating(scenario, so);
    const auto gap = relative_gap(result.report.objective, lb.value);
    doc["objective"] = result.report.objective;
    doc["relative_gap_pct"] = gap ? json(*gap) : json(nullptr);
    err << "bounds: LB " << lb.value << "  ALG " << result.report.objective << "  UB " << ub.value;
    if (gap) err << "  gap " << *gap << "%";
    err << '\n';
  } catch (const InfeasibleScenarioError& e) {
    doc["objective"] = nullptr;
    doc["relative_gap_pct"] = nullptr;
    doc["cause"] = e.what();
    err << "bounds: " << e.what() << '\n';
    code = kFailed;
  }
  doc["config_digest"] = config_digest(cfg);
  if (!opt.out.empty()) detail::write_text(opt.out, doc.dump(2) + "\n");
  out << doc.dump() << '\n';
  return code;
}

namespace detail {

struct CheckOutcome {
  std::string name;
  std::string status;  // pass, fail, skip
  std::string detail;
};

inline CheckOutcome verify_monotonicity(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::size_t comparisons = 0;
  for (int k = 0; k < 40; ++k) {
    GeneratorParams g;
    g.layer_count = 3 + rng() % 4;
    g.seed = rng();
    const auto stream = generate_stream(g, 100 + rng() % 200);
    const auto report = oracle::check_monotonicity(stream, 50, rng());
    comparisons += report.comparisons;
    if (!report.passed()) {
      const auto& ce = report.counterexamples.front();
      return {"monotonicity", "fail",
              "tp rose from " + std::to_string(ce.tp_before) + " to " + std::to_string(ce.tp_after)};
    }
  }
  return {"monotonicity", "pass", std::to_string(comparisons) + " threshold raises, no tp increase"};
}

inline CheckOutcome verify_thresholds(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int k = 0; k < 10; ++k) {
    GeneratorParams g;
    g.seed = rng();
    const auto stream = generate_stream(g, 30);
    const std::size_t budget = rng() % 31;
    const auto fast = optimal_thresholds(stream, budget);
    const auto slow = oracle::brute_force_thresholds(stream, budget, 0);
    if (fast.true_positives != slow.true_positives || fast.offloads > budget) {
      return {"thresholds", "fail", "stream " + std::to_string(k) + ": exact search disagrees with brute force"};
    }
  }
  return {"thresholds", "pass", "10 streams match brute-force candidate enumeration"};
}

inline CheckOutcome verify_accounting(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int k = 0; k < 20; ++k) {
    GeneratorParams g;
    g.seed = rng();
    const auto stream = generate_stream(g, 80);
    const auto stats = stream_stats(stream);
    std::uniform_real_distribution<double> unit(0.01, 0.99);
    double a = unit(rng), b = unit(rng);
    if (a > b) std::swap(a, b);
    const auto e = evaluate(stream, {a, b});
    if (e.counts.tp + e.counts.fn != stats.critical || e.counts.tn + e.counts.fp != stats.normal) {
      return {"accounting", "fail", "confusion counts do not partition the stream"};
    }
  }
  return {"accounting", "pass", "20 evaluations partition their streams"};
}

inline CheckOutcome verify_secrecy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    ChannelState ch;
    ch.gain = std::pow(10.0, -7.0 + unit(rng));
    ch.eav_gain = ch.gain * 2.0 * unit(rng);
    for (int a = 1; a <= 20; ++a) {
      for (int b = 1; b <= 20; ++b) {
        const LinkAllocation alloc{1e5 * b, 0.01 * a};
        const double rse = secrecy_rate(alloc, ch);
        if (!(rse >= 0.0 && rse <= uplink_rate(alloc, ch))) return {"secrecy", "fail", "0 <= r_se <= r violated"};
        if (!ch.secrecy_advantage() && rse != 0.0) return {"secrecy", "fail", "insecure channel with positive rate"};
      }
    }
  }
  return {"secrecy", "pass", "secrecy rate bounded by uplink rate on 20 channels"};
}

inline CheckOutcome verify_dp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 1 + rng() % 4;
    const std::int64_t cap = static_cast<std::int64_t>(rng() % 13);
    std::vector<UtilityCurve> curves;
    std::vector<double> weights;
    std::vector<std::vector<double>> table;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t positives = 1 + rng() % 10;
      const std::size_t length = 14;
      std::vector<ThresholdChoice> entries;
      std::size_t tp = 0;
      std::vector<double> row;
      for (std::size_t w = 0; w <= length; ++w) {
        if (w > 0 && tp < positives && rng() % 2 == 0) ++tp;
        ThresholdChoice c;
        c.true_positives = tp;
        c.utility = static_cast<double>(tp) / static_cast<double>(positives);
        entries.push_back(c);
        row.push_back(*c.utility);
      }
      curves.emplace_back(std::move(entries), length, positives);
      weights.push_back(0.5 + static_cast<double>(rng() % 100) / 50.0);
      table.push_back(std::move(row));
    }
    std::vector<ComputeClaim> claims;
    for (std::size_t i = 0; i < n; ++i) claims.push_back({weights[i], &curves[i]});
    const auto dp = allocate_compute_dp(claims, cap);
    const double brute = oracle::exhaustive_compute_split(weights, table, cap);
    if (dp.objective != brute) return {"dp", "fail", "instance " + std::to_string(k) + " differs from enumeration"};
  }
  return {"dp", "pass", "30 instances equal exhaustive split enumeration"};
}

inline std::vector<CheckOutcome> verify_solver(const std::optional<Scenario>& given, std::uint64_t seed,
                                               AssignmentMode mode) {
  std::vector<Scenario> cases;
  if (given) {
    cases.push_back(*given);
  } else {
    std::mt19937_64 rng(seed);
    for (int k = 0; k < 5; ++k) {
      RandomScenarioParams p;
      p.users = 1 + rng() % 3;
      p.nodes = 1 + rng() % 2;
      p.events_per_user = 30;
      cases.push_back(build_scenario(random_scenario(p, rng())));
    }
  }
  std::vector<CheckOutcome> outcomes;
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const auto& s = cases[k];
    const std::string tag = "solver[" + std::to_string(k) + "]";
    SolveOptions so;
    so.mode = mode;
    std::optional<SolveResult> solved;
    try {
      solved = solve_alternating(s, so);
    } catch (const InfeasibleScenarioError&) {
    }
    if (solved) {
      const auto& hist = solved->report.objective_history;
      bool monotone = true;
      for (std::size_t r = 1; r < hist.size(); ++r) monotone = monotone && hist[r] >= hist[r - 1];
      outcomes.push_back({tag + ".feasible", solved->report.feasible ? "pass" : "fail",
                          std::to_string(solved->report.violations.size()) + " violations"});
      outcomes.push_back({tag + ".monotone", monotone ? "pass" : "fail", std::to_string(hist.size()) + " rounds"});
      const bool sandwich = solved->report.objective <= solved->report.upper.value + 1e-9;
      outcomes.push_back({tag + ".upper_bound", sandwich ? "pass" : "fail",
                          "objective " + std::to_string(solved->report.objective) + " vs UB " +
                              std::to_string(solved->report.upper.value)});
    }
    try {
      const auto brute = oracle::brute_force_plan(s);
      if (!solved) {
        outcomes.push_back({tag + ".oracle", "fail", "oracle found a plan the solver missed"});
      } else if (mode == AssignmentMode::exhaustive && exhaustive_allowed(s.users(), s.nodes())) {
        const bool eq = std::abs(brute.objective - solved->report.objective) <= 1e-9;
        outcomes.push_back({tag + ".oracle", eq ? "pass" : "fail",
                            "solver " + std::to_string(solved->report.objective) + " vs oracle " +
                                std::to_string(brute.objective)});
      } else {
        const bool ok = brute.objective >= solved->report.objective - 1e-9;
        outcomes.push_back({tag + ".oracle", ok ? "pass" : "fail", "oracle dominates local search"});
      }
    } catch (const SizeGuardError& e) {
      outcomes.push_back({tag + ".oracle", "skip", e.what()});
    } catch (const InfeasibleScenarioError&) {
      outcomes.push_back({tag + ".oracle", solved ? "fail" : "pass", "both report infeasible"});
    }
  }
  return outcomes;
}

}  // namespace detail

inline int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  static const std::vector<std::string> suites{"monotonicity", "thresholds", "accounting", "secrecy", "dp", "solver"};
  if (opt.suite != "all" && std::find(suites.begin(), suites.end(), opt.suite) == suites.end()) {
    throw InvalidInputError("--suite must be all or one of monotonicity, thresholds, accounting, secrecy, dp, solver");
  }
  const auto wanted = [&](const std::string& name) { return opt.suite == "all" || opt.suite == name; };
  std::optional<Scenario> scenario;
  if (!opt.scenario.empty()) scenario = detail::load_scenario(opt.scenario).second;

  std::vector<detail::CheckOutcome> outcomes;
  if (wanted("monotonicity")) outcomes.push_back(detail::verify_monotonicity(opt.seed));
  if (wanted("thresholds")) outcomes.push_back(detail::verify_thresholds(opt.seed));
  if (wanted("accounting")) outcomes.push_back(detail::verify_accounting(opt.seed));
  if (wanted("secrecy")) outcomes.push_back(detail::verify_secrecy(opt.seed));
  if (wanted("dp")) outcomes.push_back(detail::verify_dp(opt.seed));
  if (wanted("solver")) {
    for (auto& o : detail::verify_solver(scenario, opt.seed, detail::parse_mode(opt.mode))) outcomes.push_back(std::move(o));
  }

  json checks = json::array();
  std::size_t failed = 0;
  std::size_t skipped = 0;
  for (const auto& o : outcomes) {
    std::string upper = o.status;
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    err << upper << "  " << o.name << "  " << o.detail << '\n';
    failed += o.status == "fail";
    skipped += o.status == "skip";
    checks.push_back({{"name", o.name}, {"status", o.status}, {"detail", o.detail}});
  }
  out << json{{"seed", opt.seed},
              {"suite", opt.suite},
              {"passed", outcomes.size() - failed - skipped},
              {"failed", failed},
              {"skipped", skipped},
              {"checks", checks}}
             .dump()
      << '\n';
  return failed == 0 ? kSuccess : kFailed;
}

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  const auto stream = load_stream(opt.trace);
  const auto rows = threshold_sweep(stream, opt.grid);
  if (opt.out.empty()) {
    write_sweep_csv(rows, out);
  } else {
    std::ofstream f(opt.out, std::ios::binary);
    if (!f) throw Error("cannot write " + opt.out);
    write_sweep_csv(rows, f);
    out << json{{"rows", rows.size()}, {"file", opt.out}}.dump() << '\n';
  }
  err << "sweep: " << rows.size() << " threshold pairs over " << stream.size() << " events\n";
  return kSuccess;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Fairness-aware cooperative edge inference: simulate, solve, bound and verify"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string mode = "exhaustive";

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a scenario and its trace files");
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config, "Existing scenario whose traces are materialized");
  gen_cmd->add_option("--users", gen.users, "Number of UEs")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--nodes", gen.nodes, "Number of ENs")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--levels", gen.levels, "Security levels")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--events", gen.events, "Events per UE")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--layers", gen.layers, "Exit layers")->check(CLI::PositiveNumber);
  gen_cmd->add_flag("--deterministic", gen.deterministic, "Omit timestamps");

  SolveCliOptions solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a scenario and write a result bundle");
  solve_cmd->add_option("scenario", solve.scenario, "Scenario JSON")->required();
  solve_cmd->add_option("--out", solve.out, "Result bundle path");
  solve_cmd->add_option("--mode", solve.mode, "Assignment search")->check(CLI::IsMember({"exhaustive", "local"}));
  solve_cmd->add_option("--seed", seed, "Unused; accepted for pipeline uniformity");
  solve_cmd->add_flag("--deterministic", solve.deterministic, "Omit timestamps");

  SolveCliOptions bounds;
  auto* bounds_cmd = app.add_subcommand("bounds", "Lower/upper bounds and relative gap");
  bounds_cmd->add_option("scenario", bounds.scenario, "Scenario JSON")->required();
  bounds_cmd->add_option("--out", bounds.out, "JSON output path");
  bounds_cmd->add_option("--mode", bounds.mode, "Assignment search")->check(CLI::IsMember({"exhaustive", "local"}));
  bounds_cmd->add_option("--seed", seed, "Unused; accepted for pipeline uniformity");
  bounds_cmd->add_flag("--deterministic", deterministic, "Accepted for pipeline uniformity");

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run property checks against brute-force oracles");
  verify_cmd->add_option("--scenario", verify.scenario, "Scenario for the solver suite");
  verify_cmd->add_option("--seed", verify.seed, "Random seed");
  verify_cmd->add_option("--suite", verify.suite, "all|monotonicity|thresholds|accounting|secrecy|dp|solver");
  verify_cmd->add_option("--mode", verify.mode, "Assignment search")->check(CLI::IsMember({"exhaustive", "local"}));
  verify_cmd->add_flag("--deterministic", deterministic, "Accepted for pipeline uniformity");

  SweepOptions sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Export metrics over a threshold grid");
  sweep_cmd->add_option("trace", sweep.trace, "Trace CSV")->required();
  sweep_cmd->add_option("--grid", sweep.grid, "Grid points per threshold")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep.out, "CSV output path");
  sweep_cmd->add_option("--seed", seed, "Unused; accepted for pipeline uniformity");
  sweep_cmd->add_flag("--deterministic", deterministic, "Accepted for pipeline uniformity");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out, err);
    if (*solve_cmd) return cmd_solve(solve, out, err);
    if (*bounds_cmd) return cmd_bounds(bounds, out, err);
    if (*verify_cmd) return cmd_verify(verify, out, err);
    if (*sweep_cmd) return cmd_sweep(sweep, out, err);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InvalidInputError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const InfeasibleScenarioError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kUsage;
}

}  // namespace fairedge::cli
