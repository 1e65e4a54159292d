#include <gtest/gtest.h>

#include <vector>

#include "minerflex/fleet.hpp"
#include "oracles.hpp"

using namespace minerflex;

TEST(Fleet, MiningRevenueRate) {
  EXPECT_DOUBLE_EQ(mining_revenue_rate(20000, 100), 200.0);
  EXPECT_DOUBLE_EQ(mining_revenue_rate(0, 100), 0.0);
  EXPECT_NEAR(mining_revenue_rate(20000, 130), 153.846153846, 1e-9);
  EXPECT_THROW(mining_revenue_rate(20000, 0), InvalidInput);
  EXPECT_THROW(mining_revenue_rate(20000, -5), InvalidInput);
}

TEST(Fleet, NetReward) {
  EXPECT_DOUBLE_EQ(net_reward(200, 50), 150.0);
  EXPECT_DOUBLE_EQ(net_reward(200, 200), 0.0);
  EXPECT_NEAR(net_reward(153.846, 60), 93.846, 1e-12);
  EXPECT_DOUBLE_EQ(net_reward(10, 30), -20.0);
}

TEST(Fleet, CanonicalizeSortsAscending) {
  const FleetSpec f = canonicalize({{"s19", 100, 110, 150}, {"s9", 150, 130, 94}});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].id, "s9");
  EXPECT_DOUBLE_EQ(f.reward(0), 94);
  EXPECT_DOUBLE_EQ(f.reward(1), 150);
  EXPECT_DOUBLE_EQ(f.total_capacity_mw(), 250);
  EXPECT_DOUBLE_EQ(f.max_reward(), 150);
}

TEST(Fleet, CanonicalizeMergesTies) {
  const FleetSpec f = canonicalize({{"a", 100, 1, 5}, {"b", 50, 1, 5}});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f.capacity(0), 150);
  EXPECT_EQ(f[0].id, "a+b");
}

TEST(Fleet, CanonicalizeSingleAndErrors) {
  const FleetSpec f = canonicalize({{"x", 42, 1, 7}});
  EXPECT_EQ(f.size(), 1u);
  EXPECT_DOUBLE_EQ(f.total_capacity_mw(), 42);
  EXPECT_THROW(canonicalize({}), InvalidInput);
  EXPECT_THROW(canonicalize({{"x", 1, 1, -0.5}}), ModelViolation);
  EXPECT_THROW(canonicalize({{"x", -1, 1, 3}}), InvalidInput);
}

TEST(Fleet, PricedMachinesClamp) {
  const std::vector<MachineConfig> cfg{{"old", 100, 200}, {"new", 50, 50}};
  // 10000/200 - 60 = -10, 10000/50 - 60 = 140
  EXPECT_THROW(make_fleet(cfg, 10000, 60), ModelViolation);
  std::size_t clamped = 0;
  const auto m = priced_machines(cfg, 10000, 60, true, &clamped);
  EXPECT_EQ(clamped, 1u);
  EXPECT_DOUBLE_EQ(m[0].reward, 0.0);
  const FleetSpec f = make_fleet(cfg, 10000, 60, true);
  EXPECT_DOUBLE_EQ(f.reward(1), 140.0);
}

TEST(FleetProperty, CanonicalFormInvariants) {
  oracle_test::Gen g(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto machines = g.machines(g.index(1, 6));
    const FleetSpec f = canonicalize(machines);
    double cap = 0.0;
    for (const auto& m : machines) cap += m.capacity_mw;
    double sum = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      sum += f.capacity(k);
      if (k > 0) {
        EXPECT_LT(f.reward(k - 1), f.reward(k));
      }
    }
    EXPECT_NEAR(f.total_capacity_mw(), cap, 1e-9 * cap);
    EXPECT_EQ(f.total_capacity_mw(), sum);

    const std::vector<MachineType> again(f.machines().begin(), f.machines().end());
    const FleetSpec f2 = canonicalize(again);
    ASSERT_EQ(f2.size(), f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      EXPECT_EQ(f2[k].id, f[k].id);
      EXPECT_EQ(f2.capacity(k), f.capacity(k));
      EXPECT_EQ(f2.reward(k), f.reward(k));
    }
  }
}

TEST(FleetProperty, RevenueRateIdentity) {
  oracle_test::Gen g(5);
  for (int i = 0; i < 1000; ++i) {
    const double p = g.uniform(0, 1e5);
    const double e = g.uniform(1e-3, 1e3);
    EXPECT_EQ(net_reward(mining_revenue_rate(p, e), 0.0), p / e);
  }
}
