#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"

namespace minerflex {

// Reg-up style programs shed load when deployed; reg-down programs hold back
// headroom and shed (1 - epsilon) of their commitment.
enum class Direction { up, down };

// Deployment rates epsilon_i in [0, 1], one per program.
struct DeploymentSample {
  std::vector<double> epsilon;

  std::size_t size() const noexcept { return epsilon.size(); }
  double operator[](std::size_t i) const { return epsilon[i]; }
};

// Committed capacity per program, MW.
struct Profile {
  std::vector<double> c;

  Profile() = default;
  explicit Profile(std::size_t n) : c(n, 0.0) {}
  explicit Profile(std::vector<double> values) : c(std::move(values)) {}
  Profile(std::initializer_list<double> values) : c(values) {}

  std::size_t size() const noexcept { return c.size(); }
  double operator[](std::size_t i) const { return c[i]; }
  double& operator[](std::size_t i) { return c[i]; }
  double total() const { return std::accumulate(c.begin(), c.end(), 0.0); }
  bool operator==(const Profile&) const = default;
};

// Load shed per machine type, MW, in canonical fleet order.
struct Allocation {
  std::vector<double> d;

  double total() const { return std::accumulate(d.begin(), d.end(), 0.0); }
};

inline bool is_valid_sample(const DeploymentSample& s) {
  for (double e : s.epsilon) {
    if (!(e >= 0.0 && e <= 1.0)) return false;
  }
  return true;
}

inline bool is_feasible(const Profile& p, double cap, double tol = 1e-9) {
  double sum = 0.0;
  for (double v : p.c) {
    if (!(v >= -tol) || !std::isfinite(v)) return false;
    sum += v;
  }
  return sum <= cap + tol * std::max(1.0, cap);
}

inline DeploymentSample effective_epsilon(const DeploymentSample& sample,
                                          std::span<const Direction> directions) {
  if (sample.size() != directions.size()) {
    throw InvalidInput("deployment sample and direction list differ in length");
  }
  DeploymentSample out = sample;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (directions[i] == Direction::down) out.epsilon[i] = 1.0 - out.epsilon[i];
  }
  return out;
}

namespace detail {

inline double guard_total(double total, double cap) {
  constexpr double kSlack = 1e-12;
  if (total < 0.0 && total >= -kSlack) return 0.0;
  if (total > cap && total <= cap + kSlack * std::max(1.0, cap)) return cap;
  if (!(total >= 0.0)) throw InvalidInput("negative total deployment");
  if (total > cap) {
    throw InfeasibleDeployment("deployment " + std::to_string(total) + " MW exceeds fleet capacity " +
                               std::to_string(cap) + " MW");
  }
  return total;
}

}  // namespace detail

inline double deployed_total(const Profile& profile, const DeploymentSample& sample) {
  if (profile.size() != sample.size()) {
    throw InvalidInput("profile and deployment sample differ in length");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) s += sample[i] * profile[i];
  return s;
}

// Greedy fill from the least rewarding type upward.
inline Allocation allocate_deployment(const FleetSpec& fleet, double total_deployed) {
  double remaining = detail::guard_total(total_deployed, fleet.total_capacity_mw());
  Allocation a;
  a.d.resize(fleet.size(), 0.0);
  for (std::size_t k = 0; k < fleet.size() && remaining > 0.0; ++k) {
    a.d[k] = std::min(remaining, fleet.capacity(k));
    remaining -= a.d[k];
  }
  return a;
}

// Zero-based critical type: the smallest k with total <= sum_{j<=k} c_j^M.
inline std::size_t critical_type(const FleetSpec& fleet, double total_deployed) {
  const double total = detail::guard_total(total_deployed, fleet.total_capacity_mw());
  double cumulative = 0.0;
  for (std::size_t k = 0; k < fleet.size(); ++k) {
    cumulative += fleet.capacity(k);
    if (total <= cumulative) return k;
  }
  // Only reachable through rounding in the running sum; the last type is
  // always critical when everything is deployed.
  return fleet.size() - 1;
}

// Affine surrogate with the critical type pinned to k_prime (zero-based).
inline double cost_fixed_k(const FleetSpec& fleet, std::span<const double> prices,
                           const Profile& profile, const DeploymentSample& sample,
                           std::size_t k_prime) {
  if (k_prime >= fleet.size()) throw InvalidInput("machine type index out of range");
  if (prices.size() != profile.size() || sample.size() != profile.size()) {
    throw InvalidInput("prices, profile and sample differ in length");
  }
  const double rk = fleet.reward(k_prime);
  double cost = 0.0;
  for (std::size_t k = 0; k < k_prime; ++k) cost += (fleet.reward(k) - rk) * fleet.capacity(k);
  for (std::size_t i = 0; i < profile.size(); ++i) cost += profile[i] * (rk * sample[i] - prices[i]);
  return cost;
}

// Cost of one slot (lost mining revenue minus AS revenue) once the operator
// reveals `sample`. The sample must already be direction-transformed.
inline double realized_cost(const FleetSpec& fleet, std::span<const double> prices,
                            const Profile& profile, const DeploymentSample& sample) {
  const std::size_t kc = critical_type(fleet, deployed_total(profile, sample));
  return cost_fixed_k(fleet, prices, profile, sample, kc);
}

}  // namespace minerflex

namespace minerflex {

// One fully revealed slot: fleet rewards, program prices and the
// direction-transformed deployment. Programs with observed[i] == false carry
// no deployment signal and are left out of the slot's cost entirely.
struct SlotInstance {
  FleetSpec fleet;
  std::vector<double> prices;
  DeploymentSample epsilon;
  std::vector<bool> observed;  // empty means every program observed
  int hour = -1;               // hour of day, -1 when unknown

  bool is_observed(std::size_t i) const { return observed.empty() || observed[i]; }
};

namespace detail {

inline std::size_t slot_critical_type(const SlotInstance& slot, const Profile& profile) {
  double total = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (slot.is_observed(i)) total += slot.epsilon[i] * profile[i];
  }
  return critical_type(slot.fleet, total);
}

}  // namespace detail

inline double slot_cost(const SlotInstance& slot, const Profile& profile) {
  if (slot.prices.size() != profile.size() || slot.epsilon.size() != profile.size()) {
    throw InvalidInput("slot and profile differ in program count");
  }
  const std::size_t kc = detail::slot_critical_type(slot, profile);
  const double rk = slot.fleet.reward(kc);
  double cost = 0.0;
  for (std::size_t k = 0; k < kc; ++k) cost += (slot.fleet.reward(k) - rk) * slot.fleet.capacity(k);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (slot.is_observed(i)) cost += profile[i] * (rk * slot.epsilon[i] - slot.prices[i]);
  }
  return cost;
}

// Subgradient r_{k_c} * epsilon - p of the slot cost; zero for unobserved
// programs.
inline std::vector<double> slot_subgradient(const SlotInstance& slot, const Profile& profile) {
  const std::size_t kc = detail::slot_critical_type(slot, profile);
  const double rk = slot.fleet.reward(kc);
  std::vector<double> g(profile.size(), 0.0);
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (slot.is_observed(i)) g[i] = rk * slot.epsilon[i] - slot.prices[i];
  }
  return g;
}

}  // namespace minerflex
