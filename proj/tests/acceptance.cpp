// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "fairedge/fairedge.hpp"

using namespace fairedge;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << name << ": " << detail << std::endl;
  failures += !ok;
}

// Accounting check shared by every evaluation below.
struct Ledger {
  std::size_t checked = 0;
  std::size_t broken = 0;

  void check(const EventStream& stream, ThresholdPair thr) {
    const auto e = evaluate(stream, thr);
    const auto stats = stream_stats(stream);
    ++checked;
    broken += e.counts.tp + e.counts.fn != stats.critical || e.counts.tn + e.counts.fp != stats.normal;
  }
};

Ledger ledger;

void check_random_pairs(const EventStream& stream, std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> unit(1e-6, 1.0 - 1e-6);
  for (int k = 0; k < count; ++k) {
    double a = unit(rng), b = unit(rng);
    if (a > b) std::swap(a, b);
    ledger.check(stream, {a, b});
  }
}

// --- 1 ---------------------------------------------------------------------
void theorem_suite() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  const std::size_t layers[] = {3, 4, 6};
  std::size_t comparisons = 0;
  std::size_t counterexamples = 0;
  for (int k = 0; k < 200; ++k) {
    GeneratorParams g;
    g.layer_count = layers[k % 3];
    g.seed = rng();
    const auto events = 100 + rng() % 401;
    const auto stream = generate_stream(g, events);
    const auto r = oracle::check_monotonicity(stream, 50, rng());
    comparisons += r.comparisons;
    counterexamples += r.counterexamples.size();
    check_random_pairs(stream, rng, 5);
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << comparisons << " upward moves on 200 streams, " << counterexamples << " counterexamples, " << secs << " s";
  report(1, "tp never rises under upward threshold moves", counterexamples == 0 && secs < 30.0, d.str());
}

// --- 2 ---------------------------------------------------------------------
void exact_selection() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2002);
  int mismatches = 0;
  int grid_wins = 0;
  int streams = 0;
  while (streams < 50) {
    GeneratorParams g;
    g.layer_count = 4;
    g.seed = rng();
    const auto events = 20 + rng() % 41;
    const auto stream = generate_stream(g, events);
    if (stream_stats(stream).critical == 0) continue;
    ++streams;
    const std::size_t budget = rng() % (events + 1);
    const auto fast = optimal_thresholds(stream, budget);
    const auto brute = oracle::brute_force_thresholds(stream, budget, 0);
    const auto grid = oracle::brute_force_thresholds(stream, budget, 101, {}, false);
    mismatches += fast.utility != brute.utility || fast.offloads > budget;
    grid_wins += grid.utility.value_or(0.0) > fast.utility.value_or(0.0);
    ledger.check(stream, fast.thresholds);
    check_random_pairs(stream, rng, 5);
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << streams << " streams, " << mismatches << " mismatches vs candidate-pair enumeration, " << grid_wins << " grid wins, " << secs << " s";
  report(2, "exact threshold selection", mismatches == 0 && grid_wins == 0 && secs < 60.0, d.str());
}

// --- 3 ---------------------------------------------------------------------

// Grid points at least `margin` away from every score.
std::vector<double> clear_points(const EventStream& stream, double margin) {
  std::vector<double> out;
  for (int k = 1; k < 1000; ++k) {
    const double v = k / 1000.0;
    bool clear = true;
    for (const auto& t : stream) {
      for (double c : t.confidences) clear = clear && std::abs(c - v) >= margin;
    }
    if (clear) out.push_back(v);
  }
  return out;
}

void surrogate() {
  std::mt19937_64 rng(3003);
  int done = 0;
  int attempts = 0;
  double worst = 0.0;
  while (done < 50 && attempts < 5000) {
    ++attempts;
    GeneratorParams g;
    g.layer_count = 4;
    g.seed = rng();
    g.noise_std = 1.5;
    const auto stream = generate_stream(g, 12 + rng() % 12);
    if (stream_stats(stream).critical == 0) continue;
    const auto pts = clear_points(stream, 0.02);
    if (pts.size() < 2) continue;
    double a = pts[rng() % pts.size()];
    double b = pts[rng() % pts.size()];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    const ThresholdPair thr{a, b};
    const double exact = *evaluate(stream, thr).metrics.utility;
    const double soft = *soft_utility(stream, thr, SoftParams{200.0});
    worst = std::max(worst, std::abs(soft - exact));
    ledger.check(stream, thr);
    ++done;
  }
  std::ostringstream d;
  d << done << " instances, max |soft - exact| = " << worst;
  report(3, "smooth surrogate tracks exact utility", done == 50 && worst <= 0.05, d.str());
}

// --- 4 ---------------------------------------------------------------------
void secrecy() {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t bad_zero = 0;
  std::size_t bad_equal = 0;
  std::size_t bad_range = 0;
  std::size_t bad_time = 0;
  std::size_t points = 0;
  for (int k = 0; k < 12; ++k) {
    ChannelState ch;
    ch.gain = std::pow(10.0, -8.0 + 2.0 * unit(rng));
    ch.noise_psd = std::pow(10.0, -14.0 + unit(rng));
    ch.eav_noise_psd = std::pow(10.0, -14.0 + unit(rng));
    switch (k % 4) {
      case 0: ch.eav_gain = 0.0; break;
      case 1: ch.eav_gain = ch.gain / ch.noise_psd * ch.eav_noise_psd; break;  // equal per-Hz SNR
      case 2: ch.eav_gain = ch.gain * ch.eav_noise_psd / ch.noise_psd * (1.0 + unit(rng)); break;
      default: ch.eav_gain = ch.gain * ch.eav_noise_psd / ch.noise_psd * unit(rng); break;
    }
    const bool eav_stronger = ch.eav_gain / ch.eav_noise_psd >= ch.gain / ch.noise_psd;
    const OffloadDemand demand{1e4 + 1e5 * unit(rng), 1.0};
    for (int i = 1; i <= 100; ++i) {
      for (int j = 1; j <= 100; ++j) {
        const LinkAllocation alloc{2e4 * i, 0.002 * j};
        const double rn = uplink_rate(alloc, ch);
        const double rse = secrecy_rate(alloc, ch);
        ++points;
        bad_zero += eav_stronger != (rse == 0.0);
        bad_equal += ch.eav_gain == 0.0 && rse != rn;
        bad_range += !(rse >= 0.0 && rse <= rn);
        if (rse > 0.0) {
          const double prod = offload_time(demand, alloc, ch) * rse;
          bad_time += std::abs(prod - demand.feature_bits) > 1e-12 * demand.feature_bits;
        }
      }
    }
  }
  std::ostringstream d;
  d << points << " (b,p) points on 12 channels; zero-rule " << bad_zero << ", no-eavesdropper " << bad_equal
    << ", range " << bad_range << ", time*rate " << bad_time << " failures";
  report(4, "secrecy rate properties", bad_zero + bad_equal + bad_range + bad_time == 0, d.str());
}

// --- 5-7 -------------------------------------------------------------------
bool history_monotone(const SolveReport& r) {
  for (std::size_t k = 1; k < r.objective_history.size(); ++k) {
    if (r.objective_history[k] < r.objective_history[k - 1]) return false;
  }
  return true;
}

std::size_t runs = 0;
std::size_t non_monotone = 0;

void record_run(const SolveResult& res, const Scenario& s) {
  ++runs;
  non_monotone += !history_monotone(res.report);
  for (std::size_t i = 0; i < s.users(); ++i) ledger.check(*s.ues[i].stream, res.plan.thresholds[i]);
}

void small_optimality() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5005);
  int compared = 0;
  int both_infeasible = 0;
  int mismatches = 0;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    RandomScenarioParams p;
    p.users = 1 + rng() % 3;
    p.nodes = 1 + rng() % 2;
    p.security_levels = 2;
    p.events_per_user = 30 + rng() % 31;
    p.min_compute = 1;
    p.max_compute = 8;
    const auto s = build_scenario(random_scenario(p, rng()));
    std::optional<SolveResult> res;
    std::optional<oracle::PlanOracleResult> brute;
    try {
      res = solve_alternating(s, {});
    } catch (const InfeasibleScenarioError&) {
    }
    try {
      brute = oracle::brute_force_plan(s);
    } catch (const InfeasibleScenarioError&) {
    }
    if (res) record_run(*res, s);
    if (!res && !brute) {
      ++both_infeasible;
      continue;
    }
    if (!res || !brute) {
      ++mismatches;
      continue;
    }
    ++compared;
    const double diff = std::abs(res->report.objective - brute->objective);
    worst = std::max(worst, diff);
    mismatches += diff > 1e-9 || !res->report.feasible;
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << compared << " compared, " << both_infeasible << " infeasible for both, max diff " << worst << ", " << secs
    << " s";
  report(5, "solver matches exhaustive plan oracle", mismatches == 0 && secs < 120.0, d.str());
}

void sandwich() {
  std::mt19937_64 rng(6006);
  int solved = 0;
  int infeasible = 0;
  int above = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  double max_gap = -std::numeric_limits<double>::infinity();
  int lb_feasible = 0;
  for (int k = 0; k < 100; ++k) {
    RandomScenarioParams p;
    p.users = 2 + rng() % 5;
    p.nodes = 1 + rng() % 3;
    p.security_levels = 1 + static_cast<int>(rng() % 3);
    p.events_per_user = 40 + rng() % 61;
    p.max_compute = 20;
    SolveOptions opts;
    opts.mode = k % 2 == 0 ? AssignmentMode::exhaustive : AssignmentMode::local;
    const auto s = build_scenario(random_scenario(p, rng()));
    try {
      const auto res = solve_alternating(s, opts);
      record_run(res, s);
      ++solved;
      above += !(res.report.objective <= res.report.upper.value + 1e-9);
      lb_feasible += res.report.lower.feasible;
      if (res.report.relative_gap_pct) {
        min_gap = std::min(min_gap, *res.report.relative_gap_pct);
        max_gap = std::max(max_gap, *res.report.relative_gap_pct);
      }
    } catch (const InfeasibleScenarioError&) {
      ++infeasible;
    }
  }
  std::ostringstream d;
  d << solved << " solved, " << infeasible << " infeasible, " << above << " above UB; LB feasible on " << lb_feasible
    << ", gap range [" << min_gap << ", " << max_gap << "] %";
  report(6, "objective within relaxed upper bound", above == 0 && solved > 0, d.str());
}

void alternating_monotone() {
  std::ostringstream d;
  d << runs << " solver runs, " << non_monotone << " with a decreasing step";
  report(7, "alternating objective never decreases", runs > 0 && non_monotone == 0, d.str());
}

// --- 8 ---------------------------------------------------------------------
void accounting() {
  std::ostringstream d;
  d << ledger.checked << " evaluations, " << ledger.broken << " broken partitions";
  report(8, "confusion counts partition the stream", ledger.checked > 0 && ledger.broken == 0, d.str());
}

// --- 9 ---------------------------------------------------------------------
void dp_exactness() {
  std::mt19937_64 rng(9009);
  int instances = 0;
  int mismatches = 0;
  for (int k = 0; k < 400; ++k) {
    const std::size_t n = 1 + rng() % 4;
    const std::int64_t cap = static_cast<std::int64_t>(rng() % 13);
    std::vector<UtilityCurve> curves;
    std::vector<double> weights;
    std::vector<std::vector<double>> table;
    for (std::size_t i = 0; i < n; ++i) {
      GeneratorParams g;
      g.seed = rng();
      g.layer_count = 3 + rng() % 3;
      auto stream = generate_stream(g, 8 + rng() % 20);
      while (stream_stats(stream).critical == 0) {
        ++g.seed;
        stream = generate_stream(g, stream.size());
      }
      curves.push_back(utility_curve(stream, 12));
      weights.push_back(0.25 + static_cast<double>(rng() % 1000) / 400.0);
      std::vector<double> row;
      for (std::int64_t w = 0; w <= 12; ++w) row.push_back(*curves.back().at(static_cast<std::size_t>(w)).utility);
      table.push_back(std::move(row));
    }
    std::vector<ComputeClaim> claims;
    for (std::size_t i = 0; i < n; ++i) claims.push_back({weights[i], &curves[i]});
    const auto dp = allocate_compute_dp(claims, cap);
    const double brute = oracle::exhaustive_compute_split(weights, table, cap);
    ++instances;
    mismatches += dp.objective != brute;
  }
  std::ostringstream d;
  d << instances << " instances (<= 4 users, W <= 12), " << mismatches << " mismatches";
  report(9, "compute DP equals exhaustive split", mismatches == 0, d.str());
}

// --- 10 --------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_pipeline(const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = FAIREDGE_CLI_PATH;
  const std::string d = dir.string();
  const std::string common = " --deterministic --seed 42";
  const std::vector<std::string> cmds{
      cli + " gen --out " + d + "/run --config " + FAIREDGE_DATA_DIR "/example_scenario.json" + common + " > " + d +
          "/gen.json 2>/dev/null",
      cli + " solve " + d + "/run/scenario.json --out " + d + "/run/bundle.json" + common + " > " + d +
          "/solve.json 2>/dev/null",
      cli + " bounds " + d + "/run/scenario.json --out " + d + "/run/bounds.json" + common + " > " + d +
          "/bounds.json 2>/dev/null",
  };
  for (const auto& c : cmds) {
    const int rc = std::system(c.c_str());
    if (rc != 0) return rc;
  }
  return 0;
}

void cli_reproducible() {
  const auto base = fs::temp_directory_path() / ("fairedge_acceptance_" + std::to_string(::getpid()));
  const int rc1 = run_pipeline(base / "a");
  const int rc2 = run_pipeline(base / "b");
  std::size_t files = 0;
  std::size_t differ = 0;
  for (const auto& entry : fs::recursive_directory_iterator(base / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(entry.path(), base / "a");
    differ += slurp(entry.path()) != slurp(base / "b" / rel);
  }
  std::vector<std::string> schema_errors{"bundle missing"};
  if (fs::exists(base / "a/run/bundle.json")) {
    schema_errors = validate_bundle_json(json::parse(slurp(base / "a/run/bundle.json")));
  }
  std::ostringstream d;
  d << "exit codes " << rc1 << "/" << rc2 << ", " << files << " files compared, " << differ << " differ, "
    << schema_errors.size() << " schema errors";
  for (const auto& e : schema_errors) d << "; " << e;
  report(10, "gen/solve/bounds byte-identical and bundle valid",
         rc1 == 0 && rc2 == 0 && files > 0 && differ == 0 && schema_errors.empty(), d.str());
  fs::remove_all(base);
}

}  // namespace

int main() {
  theorem_suite();
  exact_selection();
  surrogate();
  secrecy();
  small_optimality();
  sandwich();
  alternating_monotone();
  accounting();
  dp_exactness();
  cli_reproducible();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
