#include <gtest/gtest.h>

#include <random>

#include "fairedge/link.hpp"

using namespace fairedge;

namespace {

ChannelState channel(double g, double noise, double g_ev, double noise_ev) {
  ChannelState ch;
  ch.gain = g;
  ch.noise_psd = noise;
  ch.eav_gain = g_ev;
  ch.eav_noise_psd = noise_ev;
  return ch;
}

}  // namespace

TEST(Uplink, UnitSnr) {
  EXPECT_DOUBLE_EQ(uplink_rate({1.0, 1.0}, channel(1.0, 1.0, 0.0, 1.0)), 1.0);
}

TEST(Uplink, ZeroPowerOrBandwidth) {
  const auto ch = channel(1e-6, 1e-13, 0.0, 1e-13);
  EXPECT_EQ(uplink_rate({1e6, 0.0}, ch), 0.0);
  EXPECT_EQ(uplink_rate({0.0, 0.1}, ch), 0.0);
}

TEST(Uplink, ReferenceValue) {
  // 2e6 * log2(1.5)
  EXPECT_NEAR(uplink_rate({2e6, 0.1}, channel(1e-6, 1e-13, 0.0, 1e-13)), 1169925.0014423124, 1e-6);
}

TEST(Eavesdropper, ReferenceValue) {
  // 1e6 * log2(1.05)
  EXPECT_NEAR(eavesdropper_rate({1e6, 0.05}, channel(1e-6, 1e-13, 1e-7, 1e-13)), 70389.32789139794, 1e-7);
}

TEST(Eavesdropper, AbsentOrMirrored) {
  const auto none = channel(1e-6, 1e-13, 0.0, 1e-13);
  EXPECT_EQ(eavesdropper_rate({1e6, 0.1}, none), 0.0);
  const auto twin = channel(3e-7, 2e-13, 3e-7, 2e-13);
  EXPECT_EQ(eavesdropper_rate({1e6, 0.1}, twin), uplink_rate({1e6, 0.1}, twin));
}

TEST(Secrecy, NoEavesdropperMeansFullRate) {
  const auto ch = channel(1e-6, 1e-13, 0.0, 1e-13);
  EXPECT_EQ(secrecy_rate({1e6, 0.1}, ch), uplink_rate({1e6, 0.1}, ch));
}

TEST(Secrecy, EqualAdvantageIsZero) {
  EXPECT_EQ(secrecy_rate({1e6, 0.1}, channel(2e-7, 1e-13, 4e-7, 2e-13)), 0.0);
  EXPECT_EQ(secrecy_rate({1e6, 0.1}, channel(2e-7, 1e-13, 5e-7, 2e-13)), 0.0);
}

TEST(Secrecy, BoundedAndMonotoneInPower) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 5; ++k) {
    const auto ch = channel(std::pow(10.0, -7.0 + u(rng)), 1e-13, 0.0, 1e-13);
    auto adv = ch;
    adv.eav_gain = ch.gain * u(rng);
    for (int i = 1; i <= 100; ++i) {
      double prev = 0.0;
      for (int j = 1; j <= 100; ++j) {
        const LinkAllocation a{1e4 * i, 0.002 * j};
        const double rse = secrecy_rate(a, adv);
        EXPECT_GE(rse, 0.0);
        EXPECT_LE(rse, uplink_rate(a, adv));
        EXPECT_GE(rse, prev);
        prev = rse;
      }
    }
  }
}

TEST(Uplink, MonotoneInBandwidth) {
  const auto ch = channel(1e-6, 1e-13, 0.0, 1e-13);
  double prev = 0.0;
  for (int i = 1; i <= 200; ++i) {
    const double r = uplink_rate({5e3 * i, 0.1}, ch);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Offload, TimeAndEnergy) {
  // uplink rate of exactly 1e4 bit/s: b = 1e4, snr*p/b = 1.
  const auto ch = channel(1e-9, 1e-13, 0.0, 1e-13);
  const LinkAllocation a{1e4, 1e4 * 1e-13 / 1e-9};
  EXPECT_DOUBLE_EQ(secrecy_rate(a, ch), 1e4);
  EXPECT_DOUBLE_EQ(offload_time({1e4, 1.0}, a, ch), 1.0);
  const LinkAllocation half{1e4, 0.5};
  const double t = offload_time({1e4, 1.0}, half, ch);
  EXPECT_DOUBLE_EQ(offload_energy({1e4, 1.0}, half, ch), 0.5 * t);
}

TEST(Offload, TimesRateEqualsBits) {
  const auto ch = channel(3e-7, 1e-13, 5e-8, 1e-13);
  for (double b : {1e3, 1e5, 3e6}) {
    for (double p : {0.001, 0.1, 0.7}) {
      const OffloadDemand d{123456.0, 1.0};
      const LinkAllocation a{b, p};
      EXPECT_NEAR(offload_time(d, a, ch) * secrecy_rate(a, ch), d.feature_bits, 1e-12 * d.feature_bits);
    }
  }
}

TEST(Offload, InsecureLinkThrows) {
  const auto ch = channel(1e-7, 1e-13, 2e-7, 1e-13);
  EXPECT_THROW(offload_time({1e4, 1.0}, {1e6, 0.1}, ch), InsecureLinkError);
  EXPECT_THROW(offload_energy({1e4, 1.0}, {1e6, 0.1}, ch), InsecureLinkError);
}

TEST(LocalEnergy, Arithmetic) {
  EXPECT_EQ(local_inference_energy({0.0, {100, 200}}), 0.0);
  EXPECT_DOUBLE_EQ(local_inference_energy({1e-9, {100, 200, 300}}), 6e-7);
  EXPECT_EQ(local_inference_energy({1e-9, {}}), 0.0);
}

TEST(Deadline, BindingSolution) {
  const auto ch = channel(1e-6, 1e-13, 0.0, 1e-13);
  const OffloadDemand d{5e4, 0.1};
  const auto r = min_bandwidth_for_deadline(ch, 0.1, d, 1e7);
  ASSERT_TRUE(r.feasible());
  const double b = *r.bandwidth;
  EXPECT_NEAR(offload_time(d, {b, 0.1}, ch), d.deadline, 1e-6 * d.deadline);
  EXPECT_TRUE(meets_deadline(d, {b, 0.1}, ch));
  EXPECT_FALSE(meets_deadline(d, {b - 1e-6 * b, 0.1}, ch));
}

TEST(Deadline, WithEavesdropper) {
  const auto ch = channel(4e-7, 1e-13, 1e-7, 2e-13);
  const OffloadDemand d{8e4, 0.3};
  const auto r = min_bandwidth_for_deadline(ch, 0.2, d, 1e6);
  ASSERT_TRUE(r.feasible());
  EXPECT_TRUE(meets_deadline(d, {*r.bandwidth, 0.2}, ch));
  EXPECT_FALSE(meets_deadline(d, {*r.bandwidth * (1 - 1e-6), 0.2}, ch));
}

TEST(Deadline, Infeasible) {
  const auto ch = channel(1e-6, 1e-13, 0.0, 1e-13);
  const auto r = min_bandwidth_for_deadline(ch, 0.1, {1e12, 0.01}, 10.0);
  EXPECT_FALSE(r.feasible());
  EXPECT_EQ(r.failure, LinkFailure::deadline);
}

TEST(Deadline, InsecureChannel) {
  const auto ch = channel(1e-7, 1e-13, 1e-7, 1e-13);
  const auto r = min_bandwidth_for_deadline(ch, 0.1, {1e3, 1.0}, 1e6);
  EXPECT_FALSE(r.feasible());
  EXPECT_EQ(r.failure, LinkFailure::insecure);
}

TEST(Deadline, RejectsZeroPower) {
  EXPECT_THROW(min_bandwidth_for_deadline(channel(1e-6, 1e-13, 0.0, 1e-13), 0.0, {}, 1e6), InvalidInputError);
}
