#pragma once

// FDMA uplink with a passive eavesdropper: Shannon rates, secrecy rate,
// offload time/energy, local inference energy, and the smallest bandwidth
// that meets an offload deadline.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "fairedge/error.hpp"

namespace fairedge {

struct ChannelState {
  double gain = 1e-6;            // linear
  double noise_psd = 1e-13;      // W/Hz
  double eav_gain = 0.0;         // linear
  double eav_noise_psd = 1e-13;  // W/Hz

  double snr_per_watt_hz() const noexcept { return gain / noise_psd; }
  double eav_snr_per_watt_hz() const noexcept { return eav_gain / eav_noise_psd; }

  // The legitimate receiver out-hears the eavesdropper.
  bool secrecy_advantage() const noexcept { return snr_per_watt_hz() > eav_snr_per_watt_hz(); }

  bool operator==(const ChannelState&) const = default;
};

struct LinkAllocation {
  double bandwidth = 0.0;  // Hz
  double power = 0.0;      // W
};

struct EnergyModel {
  double joules_per_access = 0.0;
  std::vector<std::int64_t> access_counts;  // one per CNN block

  bool operator==(const EnergyModel&) const = default;
};

struct OffloadDemand {
  double feature_bits = 1e4;  // bits per offloaded event
  double deadline = 1.0;      // s

  bool operator==(const OffloadDemand&) const = default;
};

namespace detail {

// b * log2(1 + snr * p / b), with the b -> 0 limit taken as 0.
inline double shannon_rate(double bandwidth, double power, double snr_per_watt_hz) {
  if (bandwidth <= 0.0) return 0.0;
  return bandwidth * std::log1p(snr_per_watt_hz * power / bandwidth) / std::log(2.0);
}

}  // namespace detail

inline double uplink_rate(LinkAllocation alloc, const ChannelState& ch) {
  return detail::shannon_rate(alloc.bandwidth, alloc.power, ch.snr_per_watt_hz());
}

inline double eavesdropper_rate(LinkAllocation alloc, const ChannelState& ch) {
  return detail::shannon_rate(alloc.bandwidth, alloc.power, ch.eav_snr_per_watt_hz());
}

// [r - r_EV]^+, and exactly zero whenever the eavesdropper is at least as
// strong per watt-hertz.
inline double secrecy_rate(LinkAllocation alloc, const ChannelState& ch) {
  if (!ch.secrecy_advantage()) return 0.0;
  return std::max(0.0, uplink_rate(alloc, ch) - eavesdropper_rate(alloc, ch));
}

inline double offload_time(const OffloadDemand& demand, LinkAllocation alloc, const ChannelState& ch) {
  const double rate = secrecy_rate(alloc, ch);
  if (!(rate > 0.0)) throw InsecureLinkError("offload_time: secrecy rate is zero, link is insecure");
  return demand.feature_bits / rate;
}

// Diagnostic only; no constraint uses it.
inline double offload_energy(const OffloadDemand& demand, LinkAllocation alloc, const ChannelState& ch) {
  return alloc.power * offload_time(demand, alloc, ch);
}

// Memory-access energy of one full local inference.
inline double local_inference_energy(const EnergyModel& model) {
  const auto accesses = std::accumulate(model.access_counts.begin(), model.access_counts.end(),
                                        std::int64_t{0});
  return model.joules_per_access * static_cast<double>(accesses);
}

enum class LinkFailure { none, insecure, deadline };

struct BandwidthResult {
  std::optional<double> bandwidth;  // Hz, set when feasible
  LinkFailure failure = LinkFailure::none;

  bool feasible() const noexcept { return bandwidth.has_value(); }
};

inline bool meets_deadline(const OffloadDemand& demand, LinkAllocation alloc, const ChannelState& ch) {
  const double rate = secrecy_rate(alloc, ch);
  return rate > 0.0 && demand.feature_bits / rate <= demand.deadline;
}

// Smallest b in (0, b_max] whose secure offload time meets the deadline at
// power p, to 1e-9 relative precision. Bisection is guarded by a 64-point
// monotonicity pre-check on the secrecy rate; if that fails the first
// feasible grid cell is bisected instead.
inline BandwidthResult min_bandwidth_for_deadline(const ChannelState& ch, double power,
                                                  const OffloadDemand& demand, double b_max) {
  if (!(power > 0.0)) throw InvalidInputError("min_bandwidth_for_deadline: power must be > 0");
  if (!(b_max > 0.0)) return {std::nullopt, LinkFailure::deadline};
  if (!ch.secrecy_advantage()) return {std::nullopt, LinkFailure::insecure};
  if (!meets_deadline(demand, {b_max, power}, ch)) return {std::nullopt, LinkFailure::deadline};

  constexpr int kGrid = 64;
  double lo = 0.0;
  double hi = b_max;
  bool monotone = true;
  double prev_rate = 0.0;
  for (int k = 1; k <= kGrid; ++k) {
    const double rate = secrecy_rate({b_max * k / kGrid, power}, ch);
    if (rate < prev_rate) monotone = false;
    prev_rate = rate;
  }
  if (!monotone) {
    for (int k = 1; k <= kGrid; ++k) {
      const double b = b_max * k / kGrid;
      if (meets_deadline(demand, {b, power}, ch)) {
        hi = b;
        lo = b_max * (k - 1) / kGrid;
        break;
      }
    }
  }
  constexpr double kRelTol = 1e-9;
  while (hi - lo > kRelTol * hi) {
    const double mid = lo + (hi - lo) / 2.0;
    if (meets_deadline(demand, {mid, power}, ch)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return {hi, LinkFailure::none};
}

}  // namespace fairedge
