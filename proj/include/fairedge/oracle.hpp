#pragma once

// Deliberately naive references for tests and `verify`. Nothing here calls
// into the exit-policy or solver code it checks: labels come from a literal
// reading of the three-case label rule and plans from plain enumeration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fairedge/error.hpp"
#include "fairedge/fairopt.hpp"
#include "fairedge/link.hpp"
#include "fairedge/trace.hpp"

namespace fairedge::oracle {

struct OracleBudget {
  std::size_t max_candidate_pairs = 20'000'000;
  std::size_t max_plan_enumerations = 1'000'000;
};

// Literal three-case label rule: critical iff some layer q has C_q >= upper
// while every earlier layer lies strictly inside (lower, upper).
inline bool predicts_critical(const ConfidenceTrace& trace, double lower, double upper) {
  const auto& c = trace.confidences;
  for (std::size_t q = 0; q < c.size(); ++q) {
    bool earlier_in_band = true;
    for (std::size_t t = 0; t < q; ++t) earlier_in_band = earlier_in_band && lower < c[t] && c[t] < upper;
    if (!earlier_in_band) return false;
    if (c[q] <= lower) return false;
    if (c[q] >= upper) return true;
  }
  return false;
}

struct Tally {
  std::size_t tp = 0;
  std::size_t offloads = 0;
  std::size_t positives = 0;
};

inline Tally tally(const EventStream& stream, double lower, double upper) {
  Tally t;
  for (const auto& trace : stream) {
    const bool critical = predicts_critical(trace, lower, upper);
    const bool positive = trace.true_label == Label::critical;
    t.positives += positive;
    t.offloads += critical;
    t.tp += critical && positive;
  }
  return t;
}

struct ThresholdOracleResult {
  ThresholdPair thresholds;
  std::size_t true_positives = 0;
  std::size_t offloads = 0;
  std::optional<double> utility;
};

// Every observed score plus one sentinel 1e-6 below the smallest and one
// above the largest (pulled inward if that would leave (0,1)).
inline std::vector<double> candidate_scores(const EventStream& stream) {
  std::set<double> scores;
  for (const auto& t : stream) scores.insert(t.confidences.begin(), t.confidences.end());
  if (scores.empty()) return {};
  std::vector<double> out(scores.begin(), scores.end());
  const double lo = out.front() - 1e-6;
  const double hi = out.back() + 1e-6;
  out.insert(out.begin(), lo > 0.0 ? lo : out.front() / 2.0);
  out.push_back(hi < 1.0 ? hi : (out.back() + 1.0) / 2.0);
  return out;
}

// Uniform grid of `resolution` points spanning [0,1], endpoints nudged into
// the open interval.
inline std::vector<double> uniform_grid(std::size_t resolution) {
  std::vector<double> grid;
  for (std::size_t k = 0; k < resolution; ++k) {
    const double v = static_cast<double>(k) / static_cast<double>(resolution - 1);
    grid.push_back(std::clamp(v, 1e-6, 1.0 - 1e-6));
  }
  return grid;
}

// Best feasible utility over (a) all candidate-score pairs and (b) a uniform
// grid, both with lower <= upper. grid_resolution = 0 skips the grid.
inline ThresholdOracleResult brute_force_thresholds(const EventStream& stream, std::size_t budget,
                                                    std::size_t grid_resolution,
                                                    const OracleBudget& limits = {},
                                                    bool include_candidates = true) {
  if (grid_resolution == 1) throw InvalidInputError("brute_force_thresholds: grid_resolution must be >= 2");
  const auto cand = include_candidates ? candidate_scores(stream) : std::vector<double>{};
  const auto grid = grid_resolution >= 2 ? uniform_grid(grid_resolution) : std::vector<double>{};
  const std::size_t pairs = cand.size() * (cand.size() + 1) / 2 + grid.size() * (grid.size() + 1) / 2;
  if (pairs > limits.max_candidate_pairs) {
    throw SizeGuardError("brute_force_thresholds: " + std::to_string(pairs) + " pairs exceed the oracle budget");
  }

  ThresholdOracleResult best;
  bool have = false;
  std::size_t positives = 0;
  for (const auto& t : stream) positives += t.true_label == Label::critical;
  const auto consider = [&](const std::vector<double>& values) {
    for (std::size_t a = 0; a < values.size(); ++a) {
      for (std::size_t b = a; b < values.size(); ++b) {
        const auto t = tally(stream, values[a], values[b]);
        if (t.offloads > budget) continue;
        if (!have || t.tp > best.true_positives) {
          have = true;
          best.thresholds = {values[a], values[b]};
          best.true_positives = t.tp;
          best.offloads = t.offloads;
        }
      }
    }
  };
  consider(cand);
  consider(grid);
  if (have && positives > 0) {
    best.utility = static_cast<double>(best.true_positives) / static_cast<double>(positives);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Exhaustive plans

struct PlanOracleResult {
  AllocationPlan plan;
  double objective = 0.0;
};

inline constexpr std::int64_t kMaxOracleComputePerNode = 12;

// Every security-feasible assignment times every integer compute split.
// Throws InfeasibleScenarioError when nothing is feasible.
inline PlanOracleResult brute_force_plan(const Scenario& s, const OracleBudget& limits = {}) {
  const std::size_t n = s.users();
  const std::size_t m = s.nodes();
  if (n == 0 || m == 0) throw InvalidInputError("brute_force_plan: empty scenario");
  const double assignments = std::pow(static_cast<double>(m), static_cast<double>(n));
  if (assignments > static_cast<double>(limits.max_plan_enumerations)) {
    throw SizeGuardError("brute_force_plan: too many assignments for the oracle budget");
  }
  for (const auto& en : s.ens) {
    if (en.compute_cap > kMaxOracleComputePerNode) {
      throw SizeGuardError("brute_force_plan: node compute above the oracle limit");
    }
  }

  // Deadline bandwidth per user at full power.
  std::vector<std::optional<double>> need(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (s.p_max > 0.0) need[i] = min_bandwidth_for_deadline(s.ues[i].channel, s.p_max, s.ues[i].demand, s.b_max).bandwidth;
  }

  // Best pair per (user, budget) by direct enumeration of candidate pairs.
  std::map<std::pair<std::size_t, std::int64_t>, ThresholdOracleResult> memo;
  const auto best_for = [&](std::size_t i, std::int64_t w) -> const ThresholdOracleResult& {
    const auto key = std::make_pair(i, w);
    auto it = memo.find(key);
    if (it == memo.end()) {
      it = memo.emplace(key, brute_force_thresholds(*s.ues[i].stream, static_cast<std::size_t>(w), 0,
                                                    OracleBudget{std::numeric_limits<std::size_t>::max(), 0}))
               .first;
    }
    return it->second;
  };

  std::optional<PlanOracleResult> best;
  std::vector<std::size_t> node(n, 0);
  std::vector<std::int64_t> units(n, 0);

  const auto try_assignment = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      if (s.ens[node[i]].security > s.ues[i].security || !need[i]) return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      double bw = 0.0;
      std::size_t count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (node[i] == j) {
          bw += *need[i];
          ++count;
        }
      }
      if (!(bw <= s.ens[j].bandwidth_cap)) return;
      if (s.ens[j].power_pool && !(static_cast<double>(count) * s.p_max <= *s.ens[j].power_pool)) return;
    }
    // Recursive enumeration of compute units per user under per-node sums.
    std::vector<std::int64_t> used(m, 0);
    const auto recurse = [&](auto&& self, std::size_t i) -> void {
      if (i == n) {
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const auto& r = best_for(k, units[k]);
          const double u = r.utility.value_or(0.0);
          total += s.ues[k].weight * std::log(std::max(u, 1e-6));
        }
        if (!best || total > best->objective) {
          PlanOracleResult cand{AllocationPlan::zeros(n, m), total};
          for (std::size_t k = 0; k < n; ++k) {
            cand.plan.assignment(k, node[k]) = 1;
            cand.plan.bandwidth(k, node[k]) = *need[k];
            cand.plan.power(k, node[k]) = s.p_max;
            cand.plan.compute(k, node[k]) = units[k];
            cand.plan.thresholds[k] = best_for(k, units[k]).thresholds;
          }
          best = std::move(cand);
        }
        return;
      }
      const std::size_t j = node[i];
      for (std::int64_t w = 0; used[j] + w <= s.ens[j].compute_cap; ++w) {
        units[i] = w;
        used[j] += w;
        self(self, i + 1);
        used[j] -= w;
      }
      units[i] = 0;
    };
    recurse(recurse, 0);
  };

  while (true) {
    try_assignment();
    std::size_t pos = 0;
    while (pos < n && ++node[pos] == m) node[pos++] = 0;
    if (pos == n) break;
  }
  if (!best) {
    std::vector<std::size_t> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = i;
    throw InfeasibleScenarioError("brute_force_plan: no feasible plan", all);
  }
  return std::move(*best);
}

// ---------------------------------------------------------------------------
// Compute splits

// Every split w_1..w_n >= 0 with sum <= capacity; utility_by_budget[n][w] is
// user n's utility at budget w and must cover 0..capacity. The objective is
// summed left to right in user order. Returns the best objective and writes
// the first split reaching it.
inline double exhaustive_compute_split(const std::vector<double>& weights,
                                       const std::vector<std::vector<double>>& utility_by_budget,
                                       std::int64_t capacity, std::vector<std::int64_t>* best_split = nullptr) {
  const std::size_t n = weights.size();
  if (utility_by_budget.size() != n) throw InvalidInputError("exhaustive_compute_split: size mismatch");
  for (const auto& row : utility_by_budget) {
    if (static_cast<std::int64_t>(row.size()) <= capacity) {
      throw InvalidInputError("exhaustive_compute_split: utility table shorter than capacity");
    }
  }
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::int64_t> split(n, 0);
  const auto recurse = [&](auto&& self, std::size_t i, std::int64_t left) -> void {
    if (i == n) {
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        total += weights[k] * std::log(std::max(utility_by_budget[k][static_cast<std::size_t>(split[k])], 1e-6));
      }
      if (total > best) {
        best = total;
        if (best_split) *best_split = split;
      }
      return;
    }
    for (std::int64_t w = 0; w <= left; ++w) {
      split[i] = w;
      self(self, i + 1, left - w);
    }
    split[i] = 0;
  };
  recurse(recurse, 0, capacity);
  if (n == 0) best = 0.0;
  return best;
}

// ---------------------------------------------------------------------------
// Threshold monotonicity

struct Counterexample {
  ThresholdPair before;
  ThresholdPair after;
  std::size_t tp_before = 0;
  std::size_t tp_after = 0;
  std::vector<ConfidenceTrace> gained;  // events that became true positives
};

struct MonotonicityReport {
  std::size_t comparisons = 0;
  std::vector<Counterexample> counterexamples;

  bool passed() const noexcept { return counterexamples.empty(); }
};

// Random threshold pairs, each compared against one upward move of the lower
// threshold (staying <= upper) and one upward move of the upper threshold.
// True positives must never increase.
inline MonotonicityReport check_monotonicity(const EventStream& stream, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw InvalidInputError("check_monotonicity: samples must be >= 1");
  constexpr double kEdge = 1e-6;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(kEdge, 1.0 - kEdge);
  std::uniform_real_distribution<double> frac(0.0, 1.0);

  MonotonicityReport report;
  const auto compare = [&](ThresholdPair before, ThresholdPair after) {
    ++report.comparisons;
    const auto a = tally(stream, before.lower, before.upper);
    const auto b = tally(stream, after.lower, after.upper);
    if (b.tp <= a.tp) return;
    Counterexample ce{before, after, a.tp, b.tp, {}};
    for (const auto& t : stream) {
      if (t.true_label == Label::critical && !predicts_critical(t, before.lower, before.upper) &&
          predicts_critical(t, after.lower, after.upper)) {
        ce.gained.push_back(t);
      }
    }
    report.counterexamples.push_back(std::move(ce));
  };

  for (std::size_t k = 0; k < samples; ++k) {
    double lower = unit(rng);
    double upper = unit(rng);
    if (lower > upper) std::swap(lower, upper);
    const ThresholdPair base{lower, upper};
    compare(base, {lower + frac(rng) * (upper - lower), upper});
    compare(base, {lower, upper + frac(rng) * (1.0 - kEdge - upper)});
  }
  return report;
}

}  // namespace fairedge::oracle
