#pragma once

// Dual-threshold early exit: per-event classification, confusion metrics,
// exact threshold selection under an offload budget, and a smooth surrogate
// with a projected-gradient search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "fairedge/error.hpp"
#include "fairedge/trace.hpp"

namespace fairedge {

// Floor applied to utilities inside logarithms only.
inline constexpr double kUtilityFloor = 1e-6;

struct ThresholdPair {
  double lower = 0.0;  // exit as normal when C <= lower
  double upper = 1.0;  // exit as critical when C >= upper

  bool valid() const noexcept { return lower > 0.0 && lower <= upper && upper < 1.0; }

  static ThresholdPair make(double lower, double upper) {
    ThresholdPair thr{lower, upper};
    if (!thr.valid()) throw InvalidInputError("ThresholdPair: require 0 < lower <= upper < 1");
    return thr;
  }

  bool operator==(const ThresholdPair&) const = default;
};

struct Decision {
  Label predicted = Label::normal;
  std::size_t exit_layer = 1;  // 1-based
  bool offloaded = false;

  bool operator==(const Decision&) const = default;
};

// Scan layers in order; the first score leaving the open band (lower, upper)
// decides. Events that never leave the band are called normal at the last
// layer.
inline Decision classify(const ConfidenceTrace& trace, ThresholdPair thr) {
  const auto& c = trace.confidences;
  for (std::size_t q = 0; q < c.size(); ++q) {
    if (c[q] <= thr.lower) return {Label::normal, q + 1, false};
    if (c[q] >= thr.upper) return {Label::critical, q + 1, true};
  }
  return {Label::normal, c.size(), false};
}

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t offloads() const noexcept { return tp + fp; }
  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Rates are empty when their denominator is zero: car/ofr need events,
// fpr needs normal events, fnr/utility need critical events.
struct MetricsReport {
  std::optional<double> car;
  std::optional<double> fpr;
  std::optional<double> fnr;
  std::optional<double> ofr;
  std::optional<double> utility;
};

struct Evaluation {
  ConfusionCounts counts;
  MetricsReport metrics;
};

inline MetricsReport metrics_from_counts(const ConfusionCounts& k) {
  MetricsReport m;
  const auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const std::size_t positives = k.tp + k.fn;
  const std::size_t negatives = k.tn + k.fp;
  m.car = ratio(k.tp + k.tn, k.total());
  m.fpr = ratio(k.fp, negatives);
  m.fnr = ratio(k.fn, positives);
  m.ofr = ratio(k.tp + k.fp, k.total());
  m.utility = ratio(k.tp, positives);
  return m;
}

inline Evaluation evaluate(const EventStream& stream, ThresholdPair thr) {
  ConfusionCounts k;
  for (const auto& t : stream) {
    const bool predicted_critical = classify(t, thr).predicted == Label::critical;
    if (t.true_label == Label::critical) {
      predicted_critical ? ++k.tp : ++k.fn;
    } else {
      predicted_critical ? ++k.fp : ++k.tn;
    }
  }
  return {k, metrics_from_counts(k)};
}

// ---------------------------------------------------------------------------
// Exact threshold selection

// Sorted distinct scores from every layer of every event, bracketed by one
// sentinel below the minimum and one above the maximum. The sentinels make
// "never exit early" and "exit everything at layer 1" reachable. Sentinels
// are pulled inward when the 1e-6 offset would leave (0,1).
inline std::vector<double> threshold_candidates(const EventStream& stream) {
  constexpr double kSentinelOffset = 1e-6;
  std::vector<double> scores;
  scores.reserve(stream.size() * stream.layer_count() + 2);
  for (const auto& t : stream) scores.insert(scores.end(), t.confidences.begin(), t.confidences.end());
  std::sort(scores.begin(), scores.end());
  scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
  if (scores.empty()) return {0.5};
  const double lo = scores.front() - kSentinelOffset;
  const double hi = scores.back() + kSentinelOffset;
  scores.insert(scores.begin(), lo > 0.0 ? lo : scores.front() / 2.0);
  scores.push_back(hi < 1.0 ? hi : (scores.back() + 1.0) / 2.0);
  return scores;
}

struct ThresholdChoice {
  ThresholdPair thresholds;
  std::size_t true_positives = 0;
  std::size_t offloads = 0;
  std::optional<double> utility;  // empty when the stream has no critical events
};

namespace detail {

// Visits every candidate pair (lower = c[i], upper = c[j], i <= j) in
// ascending (i, j) order with its true-positive and offload counts.
//
// For a fixed lower threshold an event is called critical iff the largest
// score before its first score <= lower reaches the upper threshold, so one
// pass per lower candidate plus a suffix count over upper candidates covers
// the whole row.
template <typename Visitor>
void for_each_candidate_pair(const EventStream& stream, const std::vector<double>& cand,
                             Visitor&& visit) {
  const std::size_t n_cand = cand.size();
  std::vector<std::size_t> reach_all(n_cand + 1);
  std::vector<std::size_t> reach_pos(n_cand + 1);
  for (std::size_t i = 0; i < n_cand; ++i) {
    const double lower = cand[i];
    std::fill(reach_all.begin(), reach_all.end(), 0);
    std::fill(reach_pos.begin(), reach_pos.end(), 0);
    for (const auto& t : stream) {
      double peak = -1.0;
      for (double c : t.confidences) {
        if (c <= lower) break;
        peak = std::max(peak, c);
      }
      if (peak < 0.0) continue;
      const auto pos = static_cast<std::size_t>(
          std::lower_bound(cand.begin(), cand.end(), peak) - cand.begin());
      ++reach_all[pos];
      if (t.true_label == Label::critical) ++reach_pos[pos];
    }
    // Suffix sums: entry j counts events whose peak index is >= j.
    for (std::size_t j = n_cand; j-- > 0;) {
      reach_all[j] += reach_all[j + 1];
      reach_pos[j] += reach_pos[j + 1];
    }
    for (std::size_t j = i; j < n_cand; ++j) visit(i, j, reach_pos[j], reach_all[j]);
  }
}

struct PairKey {
  std::size_t tp = 0;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t offloads = 0;
  bool set = false;

  // More true positives first, then the larger lower threshold, then the
  // larger upper threshold.
  bool beats(const PairKey& other) const noexcept {
    if (!other.set) return true;
    if (tp != other.tp) return tp > other.tp;
    if (i != other.i) return i > other.i;
    return j > other.j;
  }
};

inline ThresholdChoice make_choice(const std::vector<double>& cand, const PairKey& key,
                                   std::size_t positives) {
  ThresholdChoice choice;
  choice.thresholds = {cand[key.i], cand[key.j]};
  choice.true_positives = key.tp;
  choice.offloads = key.offloads;
  if (positives > 0) choice.utility = static_cast<double>(key.tp) / static_cast<double>(positives);
  return choice;
}

}  // namespace detail

// Best pair among all candidate pairs whose offload count fits the budget.
// Never fails: the all-normal policies always offload nothing.
inline ThresholdChoice optimal_thresholds(const EventStream& stream, std::size_t offload_budget) {
  const auto cand = threshold_candidates(stream);
  detail::PairKey best;
  detail::for_each_candidate_pair(stream, cand, [&](std::size_t i, std::size_t j, std::size_t tp,
                                                    std::size_t offloads) {
    if (offloads > offload_budget) return;
    detail::PairKey key{tp, i, j, offloads, true};
    if (key.beats(best)) best = key;
  });
  return detail::make_choice(cand, best, stream_stats(stream).critical);
}

// optimal_thresholds for every budget 0..max_budget. Budgets at or beyond
// the stream size are all equivalent, so a curve built that far answers any
// budget.
class UtilityCurve {
 public:
  UtilityCurve() = default;
  UtilityCurve(std::vector<ThresholdChoice> entries, std::size_t stream_size, std::size_t positives)
      : entries_(std::move(entries)), stream_size_(stream_size), positives_(positives) {}

  std::size_t max_budget() const noexcept { return entries_.empty() ? 0 : entries_.size() - 1; }
  bool saturated() const noexcept { return max_budget() >= stream_size_; }
  std::size_t positives() const noexcept { return positives_; }

  const ThresholdChoice& at(std::size_t budget) const {
    if (entries_.empty()) throw InvalidInputError("UtilityCurve: empty curve");
    if (budget > max_budget()) {
      if (!saturated()) throw InvalidInputError("UtilityCurve: budget beyond curve");
      budget = max_budget();
    }
    return entries_[budget];
  }

  const std::vector<ThresholdChoice>& entries() const noexcept { return entries_; }

 private:
  std::vector<ThresholdChoice> entries_;
  std::size_t stream_size_ = 0;
  std::size_t positives_ = 0;
};

inline UtilityCurve utility_curve(const EventStream& stream, std::size_t max_budget) {
  const auto cand = threshold_candidates(stream);
  const std::size_t horizon = std::min(max_budget, stream.size());
  // best_exact[o]: best pair offloading exactly o events.
  std::vector<detail::PairKey> best_exact(horizon + 1);
  detail::for_each_candidate_pair(stream, cand, [&](std::size_t i, std::size_t j, std::size_t tp,
                                                    std::size_t offloads) {
    if (offloads > horizon) return;
    detail::PairKey key{tp, i, j, offloads, true};
    if (key.beats(best_exact[offloads])) best_exact[offloads] = key;
  });

  const std::size_t positives = stream_stats(stream).critical;
  std::vector<ThresholdChoice> entries;
  entries.reserve(max_budget + 1);
  detail::PairKey running;
  for (std::size_t w = 0; w <= horizon; ++w) {
    if (best_exact[w].set && best_exact[w].beats(running)) running = best_exact[w];
    entries.push_back(detail::make_choice(cand, running, positives));
  }
  for (std::size_t w = horizon + 1; w <= max_budget; ++w) entries.push_back(entries.back());
  return UtilityCurve(std::move(entries), stream.size(), positives);
}

// ---------------------------------------------------------------------------
// Smooth surrogate

struct SoftParams {
  double steepness = 50.0;
};

inline double sigmoid(double x, double steepness) {
  const double z = steepness * x;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Soft indicator that a score sits inside the continue band.
inline double soft_mask(double confidence, ThresholdPair thr, SoftParams soft) {
  return sigmoid(confidence - thr.lower, soft.steepness) *
         sigmoid(thr.upper - confidence, soft.steepness);
}

namespace detail {

// No validity check on thr: finite differences probe slightly outside the
// feasible set.
inline std::optional<double> soft_utility_unchecked(const EventStream& stream, ThresholdPair thr,
                                                    SoftParams soft) {
  std::size_t positives = 0;
  double total = 0.0;
  for (const auto& t : stream) {
    if (t.true_label != Label::critical) continue;
    ++positives;
    // Layer q scores (soft prob. the event is still undecided before q) times
    // (soft prob. layer q calls it critical); the best layer counts.
    double undecided = 1.0;
    double best = 0.0;
    for (double c : t.confidences) {
      best = std::max(best, undecided * sigmoid(c - thr.upper, soft.steepness));
      undecided *= soft_mask(c, thr, soft);
    }
    total += best;
  }
  if (positives == 0) return std::nullopt;
  return total / static_cast<double>(positives);
}

}  // namespace detail

// Differentiable stand-in for the true-positive rate. Tends to the hard
// utility as steepness grows, away from score boundaries.
inline std::optional<double> soft_utility(const EventStream& stream, ThresholdPair thr,
                                          SoftParams soft) {
  if (!thr.valid()) throw InvalidInputError("soft_utility: invalid thresholds");
  if (!(soft.steepness > 0.0)) throw InvalidInputError("soft_utility: steepness must be > 0");
  return detail::soft_utility_unchecked(stream, thr, soft);
}

// Margin keeping projected thresholds inside the open interval (0,1).
inline constexpr double kProjectionMargin = 1e-6;

// Sequential projection: lower onto [eps, upper], then upper onto
// [lower, 1 - eps].
inline ThresholdPair project_thresholds(double lower, double upper, double current_upper) {
  ThresholdPair out;
  out.lower = std::clamp(lower, kProjectionMargin, std::max(kProjectionMargin, current_upper));
  out.upper = std::clamp(upper, out.lower, 1.0 - kProjectionMargin);
  return out;
}

inline ThresholdPair projected_gradient_search(const EventStream& stream, ThresholdPair init,
                                               std::size_t steps, double learning_rate,
                                               SoftParams soft) {
  if (!init.valid()) throw InvalidInputError("projected_gradient_search: invalid init");
  if (steps == 0) throw InvalidInputError("projected_gradient_search: steps must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInputError("projected_gradient_search: learning rate must be > 0");
  if (!(soft.steepness > 0.0)) throw InvalidInputError("projected_gradient_search: steepness must be > 0");

  const auto log_objective = [&](double lower, double upper) {
    const auto u = detail::soft_utility_unchecked(stream, {lower, upper}, soft);
    return std::log(std::max(u.value_or(0.0), kUtilityFloor));
  };
  if (!detail::soft_utility_unchecked(stream, init, soft)) return init;

  constexpr double kStep = 1e-5;
  ThresholdPair x = init;
  ThresholdPair best = init;
  double best_value = *detail::soft_utility_unchecked(stream, init, soft);
  for (std::size_t s = 0; s < steps; ++s) {
    const double g_lower =
        (log_objective(x.lower + kStep, x.upper) - log_objective(x.lower - kStep, x.upper)) / (2 * kStep);
    const double g_upper =
        (log_objective(x.lower, x.upper + kStep) - log_objective(x.lower, x.upper - kStep)) / (2 * kStep);
    if (g_lower == 0.0 && g_upper == 0.0) break;
    x = project_thresholds(x.lower + learning_rate * g_lower, x.upper + learning_rate * g_upper, x.upper);
    const double value = *detail::soft_utility_unchecked(stream, x, soft);
    if (value > best_value) {
      best_value = value;
      best = x;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Threshold sweep export

struct SweepRow {
  ThresholdPair thresholds;
  MetricsReport metrics;
};

// Uniform grid k/(resolution+1), k = 1..resolution, over both thresholds
// with lower <= upper.
inline std::vector<SweepRow> threshold_sweep(const EventStream& stream, std::size_t resolution) {
  if (resolution == 0) throw InvalidInputError("threshold_sweep: resolution must be >= 1");
  std::vector<double> grid;
  for (std::size_t k = 1; k <= resolution; ++k) {
    grid.push_back(static_cast<double>(k) / static_cast<double>(resolution + 1));
  }
  std::vector<SweepRow> rows;
  for (std::size_t a = 0; a < grid.size(); ++a) {
    for (std::size_t b = a; b < grid.size(); ++b) {
      const ThresholdPair thr{grid[a], grid[b]};
      rows.push_back({thr, evaluate(stream, thr).metrics});
    }
  }
  return rows;
}

// Columns alpha_l,alpha_u,car,fpr,fnr,ofr,utility; undefined rates are
// written as empty fields.
inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  const auto field = [](const std::optional<double>& v) {
    return v ? detail::format_double(*v) : std::string();
  };
  out << "alpha_l,alpha_u,car,fpr,fnr,ofr,utility\n";
  for (const auto& r : rows) {
    out << detail::format_double(r.thresholds.lower) << ',' << detail::format_double(r.thresholds.upper)
        << ',' << field(r.metrics.car) << ',' << field(r.metrics.fpr) << ',' << field(r.metrics.fnr)
        << ',' << field(r.metrics.ofr) << ',' << field(r.metrics.utility) << '\n';
  }
}

}  // namespace fairedge
