#pragma once

// Slow reference paths. Everything here trades speed for independence from
// the analytic shortcuts used by the solvers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/random.hpp"
#include "minerflex/sgd.hpp"
#include "minerflex/traces.hpp"

namespace minerflex {

// Minimum of sum_k r_k d_k - sum_i c_i p_i over the deployment LP, found by
// filling machines in every possible order (the LP's vertices) without
// assuming any reward ordering.
inline double lp_deployment_oracle(std::span<const MachineType> machines,
                                   std::span<const double> prices, const Profile& profile,
                                   const DeploymentSample& sample) {
  const std::size_t k = machines.size();
  if (k == 0 || k > 8) throw InvalidInput("LP oracle supports 1 to 8 machine types");
  double capacity = 0.0;
  for (const auto& m : machines) capacity += m.capacity_mw;
  const double total = detail::guard_total(deployed_total(profile, sample), capacity);
  double revenue = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) revenue += profile[i] * prices[i];

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double remaining = total;
    double loss = 0.0;
    for (std::size_t idx : order) {
      const double d = std::min(remaining, machines[idx].capacity_mw);
      loss += machines[idx].reward * d;
      remaining -= d;
    }
    best = std::min(best, loss - revenue);
  } while (std::next_permutation(order.begin(), order.end()));
  return best;
}

struct GridSpec {
  std::size_t points_per_axis = 101;
  std::size_t mc_samples = 10000;
  std::uint64_t seed = 0;
};

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

struct GridOptimum {
  Profile profile;
  MonteCarloEstimate value;
  std::size_t points = 0;
};

namespace detail {

// Evaluates the slot cost for many samples as A[k_c] + r_{k_c} S - c.p with
// S = eps.c; the per-type constants are precomputed.
class CostKernel {
 public:
  CostKernel(const FleetSpec& fleet, std::span<const double> prices)
      : prices_(prices.begin(), prices.end()) {
    double cumulative = 0.0;
    double offset = 0.0;
    for (std::size_t k = 0; k < fleet.size(); ++k) {
      offset = 0.0;
      for (std::size_t j = 0; j < k; ++j) offset += (fleet.reward(j) - fleet.reward(k)) * fleet.capacity(j);
      cumulative += fleet.capacity(k);
      bounds_.push_back(cumulative);
      offsets_.push_back(offset);
      rewards_.push_back(fleet.reward(k));
    }
  }

  // samples is row-major, one row of N rates per draw.
  MonteCarloEstimate estimate(const Profile& c, std::span<const double> samples) const {
    const std::size_t n = prices_.size();
    const std::size_t m = samples.size() / n;
    double revenue = 0.0;
    for (std::size_t i = 0; i < n; ++i) revenue += c[i] * prices_[i];
    double sum = 0.0;
    double sum_sq = 0.0;
    const std::size_t last = bounds_.size() - 1;
    for (std::size_t s = 0; s < m; ++s) {
      const double* row = samples.data() + s * n;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) total += row[i] * c[i];
      std::size_t k = 0;
      while (k < last && total > bounds_[k]) ++k;
      const double cost = offsets_[k] + rewards_[k] * total - revenue;
      sum += cost;
      sum_sq += cost * cost;
    }
    const double mean = sum / static_cast<double>(m);
    const double var = m > 1 ? std::max(0.0, (sum_sq - sum * mean) / static_cast<double>(m - 1)) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(m))};
  }

 private:
  std::vector<double> prices_;
  std::vector<double> bounds_;
  std::vector<double> offsets_;
  std::vector<double> rewards_;
};

}  // namespace detail

// Draws `count` direction-transformed samples into a row-major buffer.
template <typename Sampler>
std::vector<double> draw_samples(Sampler&& sampler, std::size_t programs, std::size_t count,
                                 std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x9a1d);
  std::vector<double> out;
  out.reserve(programs * count);
  for (std::size_t s = 0; s < count; ++s) {
    const DeploymentSample d = sampler(rng);
    if (d.size() != programs) throw InvalidInput("sampler returned wrong dimension");
    out.insert(out.end(), d.epsilon.begin(), d.epsilon.end());
  }
  return out;
}

inline MonteCarloEstimate mc_expected_cost(const FleetSpec& fleet, std::span<const double> prices,
                                           const Profile& profile, std::span<const double> samples) {
  return detail::CostKernel(fleet, prices).estimate(profile, samples);
}

// Monte Carlo expected cost on every lattice point of the feasible region,
// with one shared sample set (common random numbers). Ties go to the
// lexicographically smallest profile.
template <typename Sampler>
GridOptimum grid_mc_optimum(const FleetSpec& fleet, std::span<const double> prices,
                            Sampler&& sampler, const GridSpec& grid) {
  if (grid.points_per_axis < 2) throw InvalidInput("grid needs at least two points per axis");
  if (grid.mc_samples == 0) throw InvalidInput("grid needs at least one Monte Carlo sample");
  const std::size_t n = prices.size();
  if (n == 0) throw InvalidInput("no programs");
  const auto samples = draw_samples(sampler, n, grid.mc_samples, grid.seed);
  const detail::CostKernel kernel(fleet, prices);
  const double cap = fleet.total_capacity_mw();
  const double h = cap / static_cast<double>(grid.points_per_axis - 1);
  const double slack = 1e-9 * std::max(1.0, cap);

  GridOptimum best;
  best.value.mean = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(n, 0);
  Profile c(n);
  while (true) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c[i] = std::min(cap, h * static_cast<double>(idx[i]));
      sum += c[i];
    }
    if (sum <= cap + slack) {
      ++best.points;
      const MonteCarloEstimate e = kernel.estimate(c, samples);
      if (e.mean < best.value.mean) {
        best.value = e;
        best.profile = c;
      }
    }
    // Odometer increment with the last axis fastest; skip the rest of an
    // axis once the budget is exceeded.
    std::size_t axis = n;
    while (axis > 0) {
      --axis;
      if (sum <= cap + slack && idx[axis] + 1 < grid.points_per_axis) {
        ++idx[axis];
        break;
      }
      sum -= c[axis];
      idx[axis] = 0;
      c[axis] = 0.0;
      if (axis == 0) return best;
    }
  }
}

// --- strategy comparison ------------------------------------------------------

struct StrategyReport {
  // Mean profit per slot ($/h, relative to mining only) by hour of day; hours
  // with no evaluation slots hold NaN.
  std::array<double, 24> optimized{};
  std::array<double, 24> fixed_profile{};
  std::array<double, 24> even_split{};
  std::array<double, 24> none{};
  std::array<std::size_t, 24> slots{};
  double mean_optimized = 0.0;
  double mean_fixed = 0.0;
  double mean_even = 0.0;
  double mean_none = 0.0;
  std::array<Profile, 24> hourly_profiles;
  Profile fixed;
};

struct StrategyWindow {
  std::size_t train_begin = 0;
  std::size_t train_end = 0;  // empty training window means "same as eval"
  std::size_t eval_begin = 0;
  std::size_t eval_end = 0;
};

// Realised profit of four strategies on the evaluation slots: per-hour
// profiles from the stochastic solver, one pooled hour-independent profile,
// an even split of the full capacity, and no participation.
inline StrategyReport compare_strategies(std::span<const SlotInstance> slots,
                                         const StrategyWindow& window, const SgdConfig& cfg) {
  if (window.eval_end > slots.size() || window.eval_begin >= window.eval_end) {
    throw InvalidInput("evaluation window is empty or outside the traces");
  }
  std::size_t tb = window.train_begin;
  std::size_t te = window.train_end;
  if (te <= tb) {
    tb = window.eval_begin;
    te = window.eval_end;
  }
  if (te > slots.size()) throw InvalidInput("training window outside the traces");
  const auto train = slots.subspan(tb, te - tb);
  const auto eval = slots.subspan(window.eval_begin, window.eval_end - window.eval_begin);
  const std::size_t n = eval.front().prices.size();
  double cap = eval.front().fleet.total_capacity_mw();
  for (const auto& s : slots) cap = std::min(cap, s.fleet.total_capacity_mw());

  StrategyReport rep;
  {
    SgdConfig pooled = cfg;
    pooled.seed = derive_seed(cfg.seed, 24);
    pooled.record_trajectory = false;
    rep.fixed = solve_empirical(train, pooled).profile;
  }
  for (int h = 0; h < 24; ++h) {
    std::vector<SlotInstance> hour_slots;
    for (const auto& s : train) {
      if (s.hour == h) hour_slots.push_back(s);
    }
    if (hour_slots.empty()) {
      rep.hourly_profiles[h] = rep.fixed;
      continue;
    }
    SgdConfig per_hour = cfg;
    per_hour.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(h));
    per_hour.record_trajectory = false;
    rep.hourly_profiles[h] = solve_empirical(hour_slots, per_hour).profile;
  }
  Profile even(n);
  for (std::size_t i = 0; i < n; ++i) even[i] = cap / static_cast<double>(n);
  const Profile zero(n);

  std::array<double, 24> opt{}, fix{}, evn{}, non{};
  double t_opt = 0.0, t_fix = 0.0, t_evn = 0.0, t_non = 0.0;
  for (const auto& s : eval) {
    const int h = s.hour >= 0 ? s.hour % 24 : 0;
    const double a = -slot_cost(s, rep.hourly_profiles[h]);
    const double b = -slot_cost(s, rep.fixed);
    const double c = -slot_cost(s, even);
    const double d = -slot_cost(s, zero);
    opt[h] += a;
    fix[h] += b;
    evn[h] += c;
    non[h] += d;
    t_opt += a;
    t_fix += b;
    t_evn += c;
    t_non += d;
    ++rep.slots[h];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (int h = 0; h < 24; ++h) {
    const double cnt = static_cast<double>(rep.slots[h]);
    rep.optimized[h] = rep.slots[h] ? opt[h] / cnt : nan;
    rep.fixed_profile[h] = rep.slots[h] ? fix[h] / cnt : nan;
    rep.even_split[h] = rep.slots[h] ? evn[h] / cnt : nan;
    rep.none[h] = rep.slots[h] ? non[h] / cnt : nan;
  }
  const double total = static_cast<double>(eval.size());
  rep.mean_optimized = t_opt / total;
  rep.mean_fixed = t_fix / total;
  rep.mean_even = t_evn / total;
  rep.mean_none = t_non / total;
  return rep;
}

inline StrategyReport compare_strategies(const TraceSet& traces,
                                         std::span<const MachineConfig> fleet,
                                         std::span<const Direction> directions,
                                         const StrategyWindow& window, const SgdConfig& cfg,
                                         bool clamp_negative = false) {
  const auto slots = to_slots(traces.records, fleet, directions, clamp_negative);
  return compare_strategies(slots, window, cfg);
}

}  // namespace minerflex
