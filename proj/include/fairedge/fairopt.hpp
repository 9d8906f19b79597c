#pragma once

// Joint threshold / assignment / resource allocation with proportional
// fairness: constraint checker, weighted-log objective, exact compute
// allocation, assignment search, the alternating solver and its bounds.
//
// Utility depends on compute only through the offload budget, so once every
// user's exact utility curve is known the resource step reduces to an integer
// allocation over those curves plus a per-user deadline check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairedge/error.hpp"
#include "fairedge/exitpolicy.hpp"
#include "fairedge/link.hpp"
#include "fairedge/trace.hpp"

namespace fairedge {

template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

struct UEProfile {
  double weight = 1.0;
  int security = 1;  // 1 is the most demanding level
  OffloadDemand demand;
  ChannelState channel;
  EnergyModel energy;
  std::shared_ptr<const EventStream> stream;
};

struct ENProfile {
  double bandwidth_cap = 0.0;       // Hz
  std::int64_t compute_cap = 0;     // events the EN can analyse
  int security = 1;
  std::optional<double> power_pool;  // W, unlimited when empty
};

struct Scenario {
  std::vector<UEProfile> ues;
  std::vector<ENProfile> ens;
  double b_max = 0.0;  // Hz per link
  double p_max = 0.0;  // W per link
  int security_levels = 1;

  std::size_t users() const noexcept { return ues.size(); }
  std::size_t nodes() const noexcept { return ens.size(); }
};

inline void validate_scenario(const Scenario& s) {
  if (s.ues.empty()) throw InvalidInputError("scenario: at least one UE required");
  if (s.ens.empty()) throw InvalidInputError("scenario: at least one EN required");
  if (s.security_levels < 1) throw InvalidInputError("scenario: security_levels must be >= 1");
  if (!(s.b_max >= 0.0) || !(s.p_max >= 0.0)) throw InvalidInputError("scenario: caps must be >= 0");
  for (std::size_t i = 0; i < s.ues.size(); ++i) {
    const auto& ue = s.ues[i];
    const std::string who = "scenario: ue " + std::to_string(i);
    if (!(ue.weight > 0.0)) throw InvalidInputError(who + " weight must be > 0");
    if (ue.security < 1 || ue.security > s.security_levels) {
      throw InvalidInputError(who + " security level out of range");
    }
    if (!ue.stream) throw InvalidInputError(who + " has no event stream");
    if (stream_stats(*ue.stream).critical == 0) {
      throw InvalidInputError(who + " stream has no critical events; utility undefined");
    }
  }
  for (std::size_t j = 0; j < s.ens.size(); ++j) {
    const auto& en = s.ens[j];
    const std::string who = "scenario: en " + std::to_string(j);
    if (!(en.bandwidth_cap >= 0.0) || en.compute_cap < 0) throw InvalidInputError(who + " caps must be >= 0");
    if (en.security < 1 || en.security > s.security_levels) {
      throw InvalidInputError(who + " security level out of range");
    }
  }
}

struct AllocationPlan {
  Matrix<std::uint8_t> assignment;
  Matrix<double> bandwidth;
  Matrix<double> power;
  Matrix<std::int64_t> compute;
  std::vector<ThresholdPair> thresholds;

  static AllocationPlan zeros(std::size_t users, std::size_t nodes) {
    return {Matrix<std::uint8_t>(users, nodes), Matrix<double>(users, nodes),
            Matrix<double>(users, nodes), Matrix<std::int64_t>(users, nodes),
            std::vector<ThresholdPair>(users, ThresholdPair{0.5, 0.5})};
  }

  std::size_t users() const noexcept { return assignment.rows(); }
  std::size_t nodes() const noexcept { return assignment.cols(); }

  std::optional<std::size_t> node_of(std::size_t user) const {
    for (std::size_t j = 0; j < nodes(); ++j) {
      if (assignment(user, j) == 1) return j;
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Constraint checking

enum class Constraint {
  pair_bandwidth_cap,
  pair_power_cap,
  single_assignment,
  node_bandwidth,
  node_compute,
  security,
  deadline,
  offload_compute,
  nonnegative_resources,
  threshold_range,
  binary_assignment,
  idle_pair_resources,
  node_power_pool,
};

inline const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::pair_bandwidth_cap: return "pair_bandwidth_cap";
    case Constraint::pair_power_cap: return "pair_power_cap";
    case Constraint::single_assignment: return "single_assignment";
    case Constraint::node_bandwidth: return "node_bandwidth";
    case Constraint::node_compute: return "node_compute";
    case Constraint::security: return "security";
    case Constraint::deadline: return "deadline";
    case Constraint::offload_compute: return "offload_compute";
    case Constraint::nonnegative_resources: return "nonnegative_resources";
    case Constraint::threshold_range: return "threshold_range";
    case Constraint::binary_assignment: return "binary_assignment";
    case Constraint::idle_pair_resources: return "idle_pair_resources";
    case Constraint::node_power_pool: return "node_power_pool";
  }
  return "unknown";
}

struct Violation {
  Constraint constraint;
  std::optional<std::size_t> user;
  std::optional<std::size_t> node;
  std::string detail;
};

// Evaluates every constraint of the joint problem against a concrete plan.
// An empty result means the plan is feasible.
inline std::vector<Violation> check_feasibility(const AllocationPlan& plan, const Scenario& s) {
  const std::size_t n = s.users();
  const std::size_t m = s.nodes();
  const auto dims_ok = [&](const auto& mat) { return mat.rows() == n && mat.cols() == m; };
  if (!dims_ok(plan.assignment) || !dims_ok(plan.bandwidth) || !dims_ok(plan.power) ||
      !dims_ok(plan.compute) || plan.thresholds.size() != n) {
    throw InvalidInputError("check_feasibility: plan dimensions do not match scenario");
  }

  std::vector<Violation> out;
  const auto flag = [&](Constraint c, std::optional<std::size_t> i, std::optional<std::size_t> j,
                        std::string detail) { out.push_back({c, i, j, std::move(detail)}); };

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const auto x = plan.assignment(i, j);
      const double b = plan.bandwidth(i, j);
      const double p = plan.power(i, j);
      const auto w = plan.compute(i, j);
      if (x > 1) flag(Constraint::binary_assignment, i, j, "assignment entry is not 0/1");
      if (!(b <= s.b_max)) flag(Constraint::pair_bandwidth_cap, i, j, "bandwidth exceeds b_max");
      if (!(p <= s.p_max)) flag(Constraint::pair_power_cap, i, j, "power exceeds p_max");
      if (!(b >= 0.0) || !(p >= 0.0) || w < 0) {
        flag(Constraint::nonnegative_resources, i, j, "negative bandwidth, power or compute");
      }
      if (x == 0 && (b != 0.0 || p != 0.0 || w != 0)) {
        flag(Constraint::idle_pair_resources, i, j, "resources on an unassigned pair");
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto& ue = s.ues[i];
    int connections = 0;
    int security_sum = 0;
    double b_i = 0.0;
    double p_i = 0.0;
    std::int64_t w_i = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const int x = plan.assignment(i, j);
      connections += x;
      security_sum += x * s.ens[j].security;
      b_i += x * plan.bandwidth(i, j);
      p_i += x * plan.power(i, j);
      w_i += x * plan.compute(i, j);
    }
    if (connections != 1) {
      flag(Constraint::single_assignment, i, std::nullopt,
           "connected to " + std::to_string(connections) + " nodes, expected exactly 1");
    }
    if (security_sum > ue.security) {
      flag(Constraint::security, i, std::nullopt,
           "node security level " + std::to_string(security_sum) + " above user level " +
               std::to_string(ue.security));
    }
    if (!meets_deadline(ue.demand, {b_i, p_i}, ue.channel)) {
      const double rate = secrecy_rate({b_i, p_i}, ue.channel);
      flag(Constraint::deadline, i, std::nullopt,
           rate > 0.0 ? "offload time exceeds deadline" : "secrecy rate is zero (insecure link)");
    }
    const auto& thr = plan.thresholds[i];
    if (!thr.valid()) {
      flag(Constraint::threshold_range, i, std::nullopt, "thresholds must satisfy 0 < lower <= upper < 1");
    } else {
      const auto offloads = static_cast<std::int64_t>(evaluate(*ue.stream, thr).counts.offloads());
      if (offloads > w_i) {
        flag(Constraint::offload_compute, i, std::nullopt,
             std::to_string(offloads) + " offloads exceed " + std::to_string(w_i) + " compute units");
      }
    }
  }

  for (std::size_t j = 0; j < m; ++j) {
    double b_sum = 0.0;
    double p_sum = 0.0;
    std::int64_t w_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int x = plan.assignment(i, j);
      b_sum += x * plan.bandwidth(i, j);
      p_sum += x * plan.power(i, j);
      w_sum += x * plan.compute(i, j);
    }
    const auto& en = s.ens[j];
    if (!(b_sum <= en.bandwidth_cap)) flag(Constraint::node_bandwidth, std::nullopt, j, "bandwidth over capacity");
    if (w_sum > en.compute_cap) flag(Constraint::node_compute, std::nullopt, j, "compute over capacity");
    if (en.power_pool && !(p_sum <= *en.power_pool)) {
      flag(Constraint::node_power_pool, std::nullopt, j, "power over pool");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

inline double weighted_log_utility(double weight, double utility) {
  return weight * std::log(std::max(utility, kUtilityFloor));
}

inline double objective(const AllocationPlan& plan, const Scenario& s) {
  if (plan.thresholds.size() != s.users()) throw InvalidInputError("objective: plan/scenario size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < s.users(); ++i) {
    if (!plan.thresholds[i].valid()) throw InvalidInputError("objective: invalid thresholds");
    const auto u = evaluate(*s.ues[i].stream, plan.thresholds[i]).metrics.utility;
    if (!u) throw InvalidInputError("objective: utility undefined for user " + std::to_string(i));
    total += weighted_log_utility(s.ues[i].weight, *u);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Compute allocation

struct ComputeClaim {
  double weight = 1.0;
  const UtilityCurve* curve = nullptr;

  double value(std::int64_t units) const {
    return weighted_log_utility(weight, curve->at(static_cast<std::size_t>(units)).utility.value_or(0.0));
  }
};

struct ComputeAllocation {
  std::vector<std::int64_t> units;
  double objective = 0.0;
};

namespace detail {

// Smallest budget reaching each distinct true-positive level.
inline std::vector<std::int64_t> curve_breakpoints(const UtilityCurve& curve, std::int64_t capacity) {
  std::vector<std::int64_t> points{0};
  std::size_t level = curve.at(0).true_positives;
  const auto top = std::min<std::int64_t>(capacity, static_cast<std::int64_t>(curve.max_budget()));
  for (std::int64_t w = 1; w <= top; ++w) {
    const auto tp = curve.at(static_cast<std::size_t>(w)).true_positives;
    if (tp > level) {
      points.push_back(w);
      level = tp;
    }
  }
  return points;
}

}  // namespace detail

// Exact maximiser of sum_n weight_n * ln(max(curve_n(w_n), floor)) subject to
// sum_n w_n <= capacity over non-negative integers.
//
// Forward recursion over users so partial sums accumulate in user order,
// which makes the optimum bit-identical to summing any allocation left to
// right. Among optimal allocations, later users take the largest share.
inline ComputeAllocation allocate_compute_dp(std::span<const ComputeClaim> users, std::int64_t capacity) {
  if (capacity < 0) throw InvalidInputError("allocate_compute_dp: capacity must be >= 0");
  const std::size_t n = users.size();
  std::vector<std::vector<std::int64_t>> points(n);
  std::int64_t useful = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!users[i].curve) throw InvalidInputError("allocate_compute_dp: missing curve");
    if (!users[i].curve->saturated() && static_cast<std::size_t>(capacity) > users[i].curve->max_budget()) {
      throw InvalidInputError("allocate_compute_dp: curve shorter than capacity");
    }
    points[i] = detail::curve_breakpoints(*users[i].curve, capacity);
    useful += points[i].back();
  }
  const std::int64_t cap = std::min(capacity, useful);
  const auto width = static_cast<std::size_t>(cap) + 1;

  // best[i][c]: best sum over the first i users using at most c units.
  std::vector<std::vector<double>> best(n + 1, std::vector<double>(width, 0.0));
  std::vector<std::vector<double>> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto w : points[i]) values[i].push_back(users[i].value(w));
    for (std::size_t c = 0; c < width; ++c) {
      double row_best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        const auto w = static_cast<std::size_t>(points[i][k]);
        if (w > c) break;
        row_best = std::max(row_best, best[i][c - w] + values[i][k]);
      }
      best[i + 1][c] = row_best;
    }
  }

  ComputeAllocation result;
  result.units.assign(n, 0);
  result.objective = best[n][width - 1];
  std::size_t c = width - 1;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = points[i].size(); k-- > 0;) {
      const auto w = static_cast<std::size_t>(points[i][k]);
      if (w <= c && best[i][c - w] + values[i][k] == best[i + 1][c]) {
        result.units[i] = static_cast<std::int64_t>(w);
        c -= w;
        break;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Per-user solver inputs

struct UserModel {
  UtilityCurve curve;
  BandwidthResult link;  // bandwidth meeting the deadline at p_max
};

// Curves are built to saturation so they answer every budget.
inline std::vector<UserModel> build_user_models(const Scenario& s) {
  std::vector<UserModel> models;
  models.reserve(s.users());
  for (const auto& ue : s.ues) {
    UserModel um;
    um.curve = utility_curve(*ue.stream, ue.stream->size());
    um.link = s.p_max > 0.0 ? min_bandwidth_for_deadline(ue.channel, s.p_max, ue.demand, s.b_max)
                            : BandwidthResult{std::nullopt, LinkFailure::deadline};
    models.push_back(std::move(um));
  }
  return models;
}

using Assignment = std::vector<std::size_t>;  // node index per user

namespace detail {

inline bool node_admits(const Scenario& s, const std::vector<UserModel>& models,
                        std::size_t node, std::span<const std::size_t> users) {
  const auto& en = s.ens[node];
  double bandwidth = 0.0;
  for (auto i : users) {
    if (en.security > s.ues[i].security || !models[i].link.feasible()) return false;
    bandwidth += *models[i].link.bandwidth;
  }
  if (!(bandwidth <= en.bandwidth_cap)) return false;
  if (en.power_pool && !(static_cast<double>(users.size()) * s.p_max <= *en.power_pool)) return false;
  return true;
}

inline std::vector<std::vector<std::size_t>> group_by_node(const Assignment& a, std::size_t nodes) {
  std::vector<std::vector<std::size_t>> groups(nodes);
  for (std::size_t i = 0; i < a.size(); ++i) groups[a[i]].push_back(i);
  return groups;
}

inline ComputeAllocation allocate_users(const Scenario& s, const std::vector<UserModel>& models,
                                        std::span<const std::size_t> users, std::int64_t capacity) {
  std::vector<ComputeClaim> claims;
  claims.reserve(users.size());
  for (auto i : users) claims.push_back({s.ues[i].weight, &models[i].curve});
  return allocate_compute_dp(claims, capacity);
}

}  // namespace detail

// Objective of an assignment after exact per-node compute allocation, or
// empty when some user violates security or a node's bandwidth or power
// pool overflows.
inline std::optional<double> assignment_value(const Scenario& s, const std::vector<UserModel>& models,
                                              const Assignment& a) {
  double total = 0.0;
  const auto groups = detail::group_by_node(a, s.nodes());
  for (std::size_t j = 0; j < s.nodes(); ++j) {
    if (!detail::node_admits(s, models, j, groups[j])) return std::nullopt;
    total += detail::allocate_users(s, models, groups[j], s.ens[j].compute_cap).objective;
  }
  return total;
}

enum class AssignmentMode { exhaustive, local };

inline constexpr double kExhaustiveLog2Guard = 20.0;

inline bool exhaustive_allowed(std::size_t users, std::size_t nodes) {
  return static_cast<double>(users) * std::log2(static_cast<double>(nodes)) <= kExhaustiveLog2Guard;
}

namespace detail {

// Greedy start: each user in turn joins the admissible node with the largest
// compute share, ties to the most secure node, then the lower index.
inline std::optional<Assignment> greedy_assignment(const Scenario& s, const std::vector<UserModel>& models) {
  Assignment a(s.users());
  std::vector<std::vector<std::size_t>> groups(s.nodes());
  for (std::size_t i = 0; i < s.users(); ++i) {
    std::optional<std::size_t> pick;
    double pick_share = -1.0;
    for (std::size_t j = 0; j < s.nodes(); ++j) {
      auto trial = groups[j];
      trial.push_back(i);
      if (!node_admits(s, models, j, trial)) continue;
      const double share = static_cast<double>(s.ens[j].compute_cap) / static_cast<double>(trial.size());
      if (!pick || share > pick_share ||
          (share == pick_share && s.ens[j].security < s.ens[*pick].security)) {
        pick = j;
        pick_share = share;
      }
    }
    if (!pick) return std::nullopt;
    a[i] = *pick;
    groups[*pick].push_back(i);
  }
  return a;
}

inline std::optional<Assignment> exhaustive_assignment(const Scenario& s, const std::vector<UserModel>& models,
                                                       const std::optional<Assignment>& incumbent) {
  std::optional<Assignment> best;
  double best_value = -std::numeric_limits<double>::infinity();
  if (incumbent) {
    if (auto v = assignment_value(s, models, *incumbent)) {
      best = incumbent;
      best_value = *v;
    }
  }
  Assignment a(s.users(), 0);
  while (true) {
    bool secure = true;
    for (std::size_t i = 0; i < a.size() && secure; ++i) secure = s.ens[a[i]].security <= s.ues[i].security;
    if (secure) {
      if (auto v = assignment_value(s, models, a); v && (!best || *v > best_value)) {
        best = a;
        best_value = *v;
      }
    }
    std::size_t pos = 0;
    while (pos < a.size() && ++a[pos] == s.nodes()) a[pos++] = 0;
    if (pos == a.size()) break;
  }
  return best;
}

// Best-improvement single-user moves until none helps.
inline Assignment local_search(const Scenario& s, const std::vector<UserModel>& models, Assignment a) {
  constexpr double kMinGain = 1e-12;
  double value = *assignment_value(s, models, a);
  while (true) {
    std::optional<Assignment> best_move;
    double best_value = value;
    for (std::size_t i = 0; i < s.users(); ++i) {
      for (std::size_t j = 0; j < s.nodes(); ++j) {
        if (j == a[i]) continue;
        Assignment trial = a;
        trial[i] = j;
        if (auto v = assignment_value(s, models, trial); v && *v > best_value + kMinGain) {
          best_value = *v;
          best_move = std::move(trial);
        }
      }
    }
    if (!best_move) return a;
    a = std::move(*best_move);
    value = best_value;
  }
}

}  // namespace detail

// Chooses one node per user. Exhaustive mode enumerates every assignment
// when users * log2(nodes) <= 20 and otherwise falls back to local search.
// Returns empty when no feasible assignment was found.
inline std::optional<Assignment> assignment_search(const Scenario& s, const std::vector<UserModel>& models,
                                                   AssignmentMode mode,
                                                   const std::optional<Assignment>& incumbent = std::nullopt) {
  const bool exhaustive = exhaustive_allowed(s.users(), s.nodes());
  if (mode == AssignmentMode::exhaustive && exhaustive) {
    return detail::exhaustive_assignment(s, models, incumbent);
  }
  std::optional<Assignment> start;
  if (incumbent && assignment_value(s, models, *incumbent)) start = incumbent;
  if (!start) start = detail::greedy_assignment(s, models);
  if (!start && exhaustive) start = detail::exhaustive_assignment(s, models, std::nullopt);
  if (!start) return std::nullopt;
  return detail::local_search(s, models, *start);
}

// ---------------------------------------------------------------------------
// Bounds

struct BoundResult {
  double value = 0.0;  // -inf when even the relaxation is infeasible
  bool feasible = true;
  std::vector<std::string> notes;
};

// Users and nodes grouped by exact security level; each group's node
// capacities are pooled and solved as one allocation.
inline BoundResult lower_bound(const Scenario& s, const std::vector<UserModel>& models) {
  BoundResult result;
  for (int level = 1; level <= s.security_levels; ++level) {
    std::vector<std::size_t> group_users;
    for (std::size_t i = 0; i < s.users(); ++i) {
      if (s.ues[i].security == level) group_users.push_back(i);
    }
    if (group_users.empty()) continue;

    double b_tot = 0.0;
    std::int64_t w_tot = 0;
    double p_tot = 0.0;
    bool power_limited = true;
    bool has_node = false;
    for (const auto& en : s.ens) {
      if (en.security != level) continue;
      has_node = true;
      b_tot += en.bandwidth_cap;
      w_tot += en.compute_cap;
      if (en.power_pool && power_limited) {
        p_tot += *en.power_pool;
      } else {
        power_limited = false;
      }
    }
    const std::string tag = "level " + std::to_string(level) + ": ";
    double b_need = 0.0;
    bool links_ok = true;
    for (auto i : group_users) {
      if (!models[i].link.feasible()) {
        links_ok = false;
      } else {
        b_need += *models[i].link.bandwidth;
      }
    }
    std::optional<std::string> problem;
    if (!has_node) {
      problem = "no node at this level";
    } else if (!links_ok) {
      problem = "a user cannot meet its deadline";
    } else if (!(b_need <= b_tot)) {
      problem = "pooled bandwidth insufficient";
    } else if (power_limited && !(static_cast<double>(group_users.size()) * s.p_max <= p_tot)) {
      problem = "pooled power insufficient";
    }
    if (problem) {
      result.notes.push_back(tag + *problem + "; users counted at the utility floor");
      result.feasible = false;
      for (auto i : group_users) result.value += weighted_log_utility(s.ues[i].weight, 0.0);
      continue;
    }
    result.value += detail::allocate_users(s, models, group_users, w_tot).objective;
  }
  return result;
}

// Every node merged into one pool; security and assignment dropped.
inline BoundResult upper_bound(const Scenario& s, const std::vector<UserModel>& models) {
  BoundResult result;
  double b_tot = 0.0;
  std::int64_t w_tot = 0;
  double p_tot = 0.0;
  bool power_limited = true;
  for (const auto& en : s.ens) {
    b_tot += en.bandwidth_cap;
    w_tot += en.compute_cap;
    if (en.power_pool && power_limited) {
      p_tot += *en.power_pool;
    } else {
      power_limited = false;
    }
  }
  double b_need = 0.0;
  std::vector<std::size_t> all(s.users());
  for (std::size_t i = 0; i < s.users(); ++i) {
    all[i] = i;
    if (!models[i].link.feasible()) {
      result.notes.push_back("user " + std::to_string(i) + " cannot meet its deadline");
    } else {
      b_need += *models[i].link.bandwidth;
    }
  }
  if (!(b_need <= b_tot)) result.notes.push_back("pooled bandwidth insufficient");
  if (power_limited && !(static_cast<double>(s.users()) * s.p_max <= p_tot)) {
    result.notes.push_back("pooled power insufficient");
  }
  if (!result.notes.empty()) {
    result.feasible = false;
    result.value = -std::numeric_limits<double>::infinity();
    return result;
  }
  result.value = detail::allocate_users(s, models, all, w_tot).objective;
  return result;
}

inline BoundResult lower_bound(const Scenario& s) {
  validate_scenario(s);
  return lower_bound(s, build_user_models(s));
}

inline BoundResult upper_bound(const Scenario& s) {
  validate_scenario(s);
  return upper_bound(s, build_user_models(s));
}

// Percent change of the algorithm over the lower bound; the denominator takes
// the absolute value because log objectives are usually negative.
inline std::optional<double> relative_gap(double u_alg, double u_lb) {
  if (u_lb == 0.0 || !std::isfinite(u_lb) || !std::isfinite(u_alg)) return std::nullopt;
  return (u_alg - u_lb) / std::abs(u_lb) * 100.0;
}

// Aggregated proportional change sum_n rho_n (u*_n - u_n) / u_n of each
// alternative against u. A reference vector is proportionally fair over the
// sampled alternatives iff no aggregate is positive.
inline std::vector<double> fairness_check(std::span<const double> u,
                                          const std::vector<std::vector<double>>& alternatives,
                                          std::span<const double> weights) {
  if (u.size() != weights.size()) throw InvalidInputError("fairness_check: size mismatch");
  for (double v : u) {
    if (!(v > 0.0)) throw InvalidInputError("fairness_check: utilities must be > 0");
  }
  std::vector<double> out;
  out.reserve(alternatives.size());
  for (const auto& alt : alternatives) {
    if (alt.size() != u.size()) throw InvalidInputError("fairness_check: alternative size mismatch");
    double total = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) total += weights[n] * (alt[n] - u[n]) / u[n];
    out.push_back(total);
  }
  return out;
}

inline constexpr double kFairnessTolerance = 1e-9;

inline bool proportionally_fair(std::span<const double> aggregates) {
  return std::all_of(aggregates.begin(), aggregates.end(),
                     [](double a) { return a <= kFairnessTolerance; });
}

// ---------------------------------------------------------------------------
// Alternating solver

struct SolveOptions {
  AssignmentMode mode = AssignmentMode::exhaustive;
  std::size_t max_rounds = 50;
  double tolerance = 1e-9;
};

struct UserDiagnostics {
  std::size_t node = 0;
  double bandwidth = 0.0;  // Hz
  double power = 0.0;      // W
  std::int64_t compute = 0;
  double offload_time = 0.0;    // s per event
  double offload_energy = 0.0;  // J per event
  double local_energy = 0.0;    // J per event
  ConfusionCounts counts;
  MetricsReport metrics;
};

struct SolveReport {
  double objective = 0.0;
  std::vector<double> per_user_utility;
  std::size_t iterations = 0;
  std::vector<double> objective_history;  // one entry per round
  bool feasible = false;
  std::vector<Violation> violations;
  BoundResult lower;
  BoundResult upper;
  std::optional<double> relative_gap_pct;
  std::vector<UserDiagnostics> diagnostics;
};

struct SolveResult {
  AllocationPlan plan;
  SolveReport report;
};

namespace detail {

// Resource step for a fixed assignment: deadline bandwidth at p_max, exact
// compute split per node, then each user's best thresholds for its budget.
inline AllocationPlan realize_plan(const Scenario& s, const std::vector<UserModel>& models, const Assignment& a) {
  auto plan = AllocationPlan::zeros(s.users(), s.nodes());
  const auto groups = group_by_node(a, s.nodes());
  for (std::size_t j = 0; j < s.nodes(); ++j) {
    const auto alloc = allocate_users(s, models, groups[j], s.ens[j].compute_cap);
    for (std::size_t k = 0; k < groups[j].size(); ++k) {
      const auto i = groups[j][k];
      plan.assignment(i, j) = 1;
      plan.bandwidth(i, j) = *models[i].link.bandwidth;
      plan.power(i, j) = s.p_max;
      plan.compute(i, j) = alloc.units[k];
      plan.thresholds[i] = models[i].curve.at(static_cast<std::size_t>(alloc.units[k])).thresholds;
    }
  }
  return plan;
}

inline void check_servable(const Scenario& s, const std::vector<UserModel>& models) {
  std::vector<std::size_t> blocked;
  std::string why;
  for (std::size_t i = 0; i < s.users(); ++i) {
    const auto& link = models[i].link;
    bool any_node = false;
    for (const auto& en : s.ens) any_node = any_node || en.security <= s.ues[i].security;
    if (!link.feasible() || !any_node) {
      blocked.push_back(i);
      why += " user " + std::to_string(i) + ": ";
      if (!any_node) {
        why += "no node at an admissible security level;";
      } else if (link.failure == LinkFailure::insecure) {
        why += "insecure link (eavesdropper advantage);";
      } else {
        why += "deadline unreachable within b_max at p_max;";
      }
    }
  }
  if (!blocked.empty()) throw InfeasibleScenarioError("infeasible scenario:" + why, blocked);
}

}  // namespace detail

inline SolveReport describe_plan(const AllocationPlan& plan, const Scenario& s) {
  SolveReport report;
  report.objective = objective(plan, s);
  report.violations = check_feasibility(plan, s);
  report.feasible = report.violations.empty();
  for (std::size_t i = 0; i < s.users(); ++i) {
    const auto& ue = s.ues[i];
    UserDiagnostics d;
    d.node = plan.node_of(i).value_or(0);
    d.bandwidth = plan.bandwidth(i, d.node);
    d.power = plan.power(i, d.node);
    d.compute = plan.compute(i, d.node);
    const LinkAllocation link{d.bandwidth, d.power};
    if (secrecy_rate(link, ue.channel) > 0.0) {
      d.offload_time = offload_time(ue.demand, link, ue.channel);
      d.offload_energy = offload_energy(ue.demand, link, ue.channel);
    } else {
      d.offload_time = std::numeric_limits<double>::infinity();
      d.offload_energy = std::numeric_limits<double>::infinity();
    }
    d.local_energy = local_inference_energy(ue.energy);
    const auto eval = evaluate(*ue.stream, plan.thresholds[i]);
    d.counts = eval.counts;
    d.metrics = eval.metrics;
    report.per_user_utility.push_back(eval.metrics.utility.value_or(0.0));
    report.diagnostics.push_back(d);
  }
  return report;
}

// Block coordinate ascent over assignment, resources and thresholds until the
// objective gains less than the tolerance or max_rounds is reached. Throws
// InfeasibleScenarioError when some user cannot be served at all or no
// assignment fits the node capacities.
inline SolveResult solve_alternating(const Scenario& s, const SolveOptions& opts = {}) {
  validate_scenario(s);
  const auto models = build_user_models(s);
  detail::check_servable(s, models);

  std::optional<Assignment> incumbent = detail::greedy_assignment(s, models);
  std::optional<AllocationPlan> best_plan;
  std::vector<double> history;
  if (incumbent) {
    best_plan = detail::realize_plan(s, models, *incumbent);
    history.push_back(objective(*best_plan, s));
  }
  const std::size_t rounds = std::max<std::size_t>(opts.max_rounds, 1);
  for (std::size_t r = 0; r < rounds; ++r) {
    auto next = assignment_search(s, models, opts.mode, incumbent);
    if (!next) break;
    auto plan = detail::realize_plan(s, models, *next);
    const double value = objective(plan, s);
    const bool improved = history.empty() || value > history.back();
    const bool converged = !history.empty() && value - history.back() < opts.tolerance;
    if (improved) {
      history.push_back(value);
      best_plan = std::move(plan);
      incumbent = std::move(next);
    } else {
      history.push_back(history.back());
    }
    if (converged) break;
  }
  if (!best_plan) {
    std::vector<std::size_t> all(s.users());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    throw InfeasibleScenarioError("infeasible scenario: no assignment fits node bandwidth/power capacities", all);
  }

  SolveResult result{std::move(*best_plan), {}};
  result.report = describe_plan(result.plan, s);
  result.report.iterations = history.size();
  result.report.objective_history = std::move(history);
  result.report.lower = lower_bound(s, models);
  result.report.upper = upper_bound(s, models);
  result.report.relative_gap_pct = relative_gap(result.report.objective, result.report.lower.value);
  return result;
}

}  // namespace fairedge
