#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "minerflex/error.hpp"

namespace minerflex {

// One class of mining machine. `reward` is the per-MWh net mining reward r_k
// for the current slot; it is filled in from coin and electricity prices.
struct MachineType {
  std::string id;
  double capacity_mw = 0.0;
  double energy_intensity = 1.0;  // MWh per coin
  double reward = 0.0;            // $/MWh
};

// Static description of a machine class as it appears in a fleet config file.
struct MachineConfig {
  std::string id;
  double capacity_mw = 0.0;
  double energy_intensity = 1.0;
};

// Machines sorted strictly ascending by reward, so index 0 is the least
// efficient type and the first one shut down when capacity is deployed.
class FleetSpec {
 public:
  FleetSpec() = default;

  std::span<const MachineType> machines() const noexcept { return machines_; }
  std::size_t size() const noexcept { return machines_.size(); }
  const MachineType& operator[](std::size_t k) const { return machines_[k]; }
  double total_capacity_mw() const noexcept { return total_capacity_; }
  double capacity(std::size_t k) const { return machines_[k].capacity_mw; }
  double reward(std::size_t k) const { return machines_[k].reward; }
  double max_reward() const { return machines_.empty() ? 0.0 : machines_.back().reward; }

 private:
  friend FleetSpec canonicalize(std::vector<MachineType> machines);

  std::vector<MachineType> machines_;
  double total_capacity_ = 0.0;
};

inline double mining_revenue_rate(double coin_price, double energy_intensity) {
  if (!(energy_intensity > 0.0) || !std::isfinite(energy_intensity)) {
    throw InvalidInput("energy intensity must be positive, got " +
                       std::to_string(energy_intensity));
  }
  return coin_price / energy_intensity;
}

inline double net_reward(double revenue_rate, double electricity_price) {
  return revenue_rate - electricity_price;
}

// Sorts by reward, merges equal-reward types and totals the capacity.
inline FleetSpec canonicalize(std::vector<MachineType> machines) {
  if (machines.empty()) throw InvalidInput("fleet has no machines");
  for (const auto& m : machines) {
    if (!(m.capacity_mw >= 0.0) || !std::isfinite(m.capacity_mw)) {
      throw InvalidInput("machine '" + m.id + "' has invalid capacity");
    }
    if (!std::isfinite(m.reward)) {
      throw InvalidInput("machine '" + m.id + "' has non-finite reward");
    }
    if (m.reward < 0.0) {
      throw ModelViolation("machine '" + m.id + "' has negative net reward " +
                           std::to_string(m.reward));
    }
  }
  std::stable_sort(machines.begin(), machines.end(),
                   [](const MachineType& a, const MachineType& b) { return a.reward < b.reward; });

  FleetSpec fleet;
  for (auto& m : machines) {
    if (!fleet.machines_.empty() && fleet.machines_.back().reward == m.reward) {
      auto& last = fleet.machines_.back();
      last.capacity_mw += m.capacity_mw;
      last.id += "+" + m.id;
    } else {
      fleet.machines_.push_back(std::move(m));
    }
  }
  for (const auto& m : fleet.machines_) fleet.total_capacity_ += m.capacity_mw;
  return fleet;
}

// Rewards for one slot from coin economics. With clamp_negative set, negative
// rewards become 0 and `clamped` (if given) counts how many were touched.
inline std::vector<MachineType> priced_machines(std::span<const MachineConfig> configs,
                                                double coin_price, double electricity_price,
                                                bool clamp_negative = false,
                                                std::size_t* clamped = nullptr) {
  std::vector<MachineType> out;
  out.reserve(configs.size());
  for (const auto& cfg : configs) {
    MachineType m{cfg.id, cfg.capacity_mw, cfg.energy_intensity, 0.0};
    m.reward = net_reward(mining_revenue_rate(coin_price, cfg.energy_intensity), electricity_price);
    if (m.reward < 0.0 && clamp_negative) {
      m.reward = 0.0;
      if (clamped) ++*clamped;
    }
    out.push_back(std::move(m));
  }
  return out;
}

inline FleetSpec make_fleet(std::span<const MachineConfig> configs, double coin_price,
                            double electricity_price, bool clamp_negative = false) {
  return canonicalize(priced_machines(configs, coin_price, electricity_price, clamp_negative));
}

}  // namespace minerflex
