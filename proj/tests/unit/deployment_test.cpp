#include <gtest/gtest.h>

#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/oracle.hpp"
#include "oracles.hpp"

using namespace minerflex;

namespace {

FleetSpec two_machines() { return canonicalize({{"a", 150, 1, 94}, {"b", 100, 1, 150}}); }

}  // namespace

TEST(Deployment, EffectiveEpsilon) {
  const std::vector<Direction> up{Direction::up}, down{Direction::down};
  EXPECT_EQ(effective_epsilon({{0.3}}, up).epsilon, std::vector<double>{0.3});
  EXPECT_DOUBLE_EQ(effective_epsilon({{0.3}}, down)[0], 0.7);
  const std::vector<Direction> mixed{Direction::up, Direction::down};
  EXPECT_EQ(effective_epsilon({{0.0, 1.0}}, mixed).epsilon, (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(effective_epsilon({{0.1, 0.2}}, up), InvalidInput);
}

TEST(Deployment, AllocateExamples) {
  const FleetSpec f = canonicalize({{"a", 150, 1, 10}, {"b", 100, 1, 20}});
  EXPECT_EQ(allocate_deployment(f, 200).d, (std::vector<double>{150, 50}));
  EXPECT_EQ(allocate_deployment(f, 0).d, (std::vector<double>{0, 0}));
  EXPECT_THROW(allocate_deployment(f, 251), InfeasibleDeployment);
  EXPECT_EQ(allocate_deployment(f, 250 + 1e-11).d, (std::vector<double>{150, 100}));

  const FleetSpec g = canonicalize({{"a", 50, 1, 1}, {"b", 50, 1, 2}, {"c", 50, 1, 3}});
  EXPECT_EQ(allocate_deployment(g, 120).d, (std::vector<double>{50, 50, 20}));
  EXPECT_NEAR(oracle_test::lp_grid_min({50, 50, 50}, {1, 2, 3}, 120, 1.0), 50 + 100 + 60, 1e-9);
}

TEST(Deployment, CriticalTypeIsZeroBasedAndInclusive) {
  const FleetSpec f = canonicalize({{"a", 150, 1, 10}, {"b", 100, 1, 20}});
  EXPECT_EQ(critical_type(f, 100), 0u);
  EXPECT_EQ(critical_type(f, 150), 0u);
  EXPECT_EQ(critical_type(f, 150.5), 1u);
  EXPECT_EQ(critical_type(f, 250), 1u);
  EXPECT_EQ(critical_type(f, -1e-13), 0u);
  EXPECT_THROW(critical_type(f, -1.0), InvalidInput);
}

TEST(Deployment, RealizedCostExamples) {
  const FleetSpec f = two_machines();
  const std::vector<double> p{20};
  EXPECT_DOUBLE_EQ(realized_cost(f, p, Profile({250}), {{0.8}}), 16600);
  // Same number from the raw objective: sum r_k d_k - sum c_i p_i.
  const Allocation a = allocate_deployment(f, 200);
  EXPECT_DOUBLE_EQ(94 * a.d[0] + 150 * a.d[1] - 250 * 20.0, 16600);

  const std::vector<double> p2{20, 7};
  EXPECT_DOUBLE_EQ(realized_cost(f, p2, Profile({100, 50}), {{0, 0}}), -(100 * 20.0 + 50 * 7.0));
  EXPECT_DOUBLE_EQ(realized_cost(f, p2, Profile(2), {{0.4, 0.9}}), 0.0);
}

TEST(Deployment, CostFixedK) {
  const FleetSpec f = two_machines();
  const std::vector<double> p{20};
  const Profile c({250});
  EXPECT_DOUBLE_EQ(cost_fixed_k(f, p, c, {{0.8}}, 1), 16600);
  EXPECT_THROW(cost_fixed_k(f, p, c, {{0.8}}, 2), InvalidInput);
  const FleetSpec one = canonicalize({{"x", 80, 1, 40}});
  const Profile c1({60});
  EXPECT_DOUBLE_EQ(cost_fixed_k(one, p, c1, {{0.5}}, 0), realized_cost(one, p, c1, {{0.5}}));
}

TEST(DeploymentProperty, MatchesLpGridOracle) {
  oracle_test::Gen g(21);
  for (int trial = 0; trial < 300; ++trial) {
    const FleetSpec f = canonicalize(g.machines(g.index(1, 3)));
    const std::size_t n = g.index(1, 3);
    std::vector<double> prices(n);
    for (auto& p : prices) p = g.uniform(0, 60);
    const Profile c = g.feasible(n, f.total_capacity_mw());
    const DeploymentSample s{g.epsilon(n)};
    const double cost = realized_cost(f, prices, c, s);

    std::vector<double> caps, rewards;
    for (const auto& m : f.machines()) {
      caps.push_back(m.capacity_mw);
      rewards.push_back(m.reward);
    }
    const double h = 0.01 * f.total_capacity_mw();
    const double grid = oracle_test::lp_grid_min(caps, rewards, deployed_total(c, s), h) -
                        c.c[0] * prices[0] - (n > 1 ? c.c[1] * prices[1] : 0) -
                        (n > 2 ? c.c[2] * prices[2] : 0);
    EXPECT_LE(cost, grid + 1e-9 * std::max(1.0, std::abs(grid)));
    EXPECT_GE(cost, grid - h * f.max_reward() - 1e-9);
  }
}

TEST(DeploymentProperty, EqualsPermutationOracle) {
  oracle_test::Gen g(22);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto machines = g.machines(g.index(1, 4));
    const FleetSpec f = canonicalize(machines);
    const std::size_t n = g.index(1, 3);
    std::vector<double> prices(n);
    for (auto& p : prices) p = g.uniform(0, 60);
    const Profile c = g.feasible(n, f.total_capacity_mw());
    const DeploymentSample s{g.epsilon(n)};
    EXPECT_NEAR(realized_cost(f, prices, c, s), lp_deployment_oracle(machines, prices, c, s), 1e-9);
  }
}

TEST(DeploymentProperty, MaxOfAffinesAndConvexity) {
  oracle_test::Gen g(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const FleetSpec f = canonicalize(g.machines(g.index(1, 4)));
    const std::size_t n = g.index(1, 3);
    std::vector<double> prices(n);
    for (auto& p : prices) p = g.uniform(0, 60);
    const DeploymentSample s{g.epsilon(n)};
    const Profile a = g.feasible(n, f.total_capacity_mw());
    const Profile b = g.feasible(n, f.total_capacity_mw());

    double mx = -1e300;
    for (std::size_t k = 0; k < f.size(); ++k) mx = std::max(mx, cost_fixed_k(f, prices, a, s, k));
    EXPECT_NEAR(realized_cost(f, prices, a, s), mx, 1e-9 * std::max(1.0, std::abs(mx)));

    const double t = g.uniform(0, 1);
    Profile m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = t * a[i] + (1 - t) * b[i];
    const double lhs = realized_cost(f, prices, m, s);
    const double rhs = t * realized_cost(f, prices, a, s) + (1 - t) * realized_cost(f, prices, b, s);
    EXPECT_LE(lhs, rhs + 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST(DeploymentProperty, AllocationMonotoneAndExact) {
  oracle_test::Gen g(24);
  for (int trial = 0; trial < 500; ++trial) {
    const FleetSpec f = canonicalize(g.machines(g.index(1, 5)));
    const double t1 = g.uniform(0, f.total_capacity_mw());
    const double t2 = g.uniform(t1, f.total_capacity_mw());
    const Allocation a = allocate_deployment(f, t1);
    const Allocation b = allocate_deployment(f, t2);
    EXPECT_NEAR(a.total(), t1, 1e-9);
    for (std::size_t k = 0; k < f.size(); ++k) {
      EXPECT_LE(a.d[k], b.d[k]);
      EXPECT_GE(a.d[k], 0.0);
      EXPECT_LE(a.d[k], f.capacity(k));
    }
  }
}

TEST(Deployment, SlotMasksUnobservedPrograms) {
  SlotInstance slot;
  slot.fleet = two_machines();
  slot.prices = {20, 10};
  slot.epsilon = {{0.5, 0.9}};
  slot.observed = {true, false};
  const Profile c({100, 100});
  // Only program 0 counts: deployed 50 MW on the 94 type.
  EXPECT_DOUBLE_EQ(slot_cost(slot, c), 100 * (94 * 0.5 - 20));
  const auto g = slot_subgradient(slot, c);
  EXPECT_DOUBLE_EQ(g[0], 94 * 0.5 - 20);
  EXPECT_DOUBLE_EQ(g[1], 0.0);
  slot.observed.clear();
  EXPECT_DOUBLE_EQ(slot_cost(slot, c), realized_cost(slot.fleet, slot.prices, c, slot.epsilon));
}
