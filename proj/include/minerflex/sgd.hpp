#pragma once

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/projection.hpp"
#include "minerflex/random.hpp"

namespace minerflex {

struct SgdConfig {
  std::size_t iterations = 1000;  // J
  std::size_t batch = 10;         // M
  std::uint64_t seed = 0;
  // Replaces D / (sqrt(N) * max(r_K, p_max)) in the step size when set.
  std::optional<double> step_scale;
  bool record_trajectory = false;
};

struct SgdResult {
  Profile profile;                  // average of all iterates
  std::vector<Profile> trajectory;  // c^(1..J) when requested
  double bound = 0.0;               // expected suboptimality bound, $
};

// Upper bound on the diameter of the feasible region.
inline double feasible_diameter(std::size_t programs, double cap) {
  return programs <= 1 ? cap : std::sqrt(2.0) * cap;
}

// Bound on the subgradient norm: sqrt(N) * max(r_max, p_max).
inline double gradient_bound(std::size_t programs, double r_max, double p_max) {
  return std::sqrt(static_cast<double>(programs)) * std::max(r_max, p_max);
}

inline double step_size(std::size_t j, double diameter, double grad_bound) {
  return diameter / (grad_bound * std::sqrt(static_cast<double>(j)));
}

inline double suboptimality_bound(std::size_t iterations, std::size_t programs, double r_max,
                                  double p_max, double cap) {
  const double d = feasible_diameter(programs, cap);
  return 3.0 * d * gradient_bound(programs, r_max, p_max) /
         (2.0 * std::sqrt(static_cast<double>(iterations)));
}

// Batch-averaged subgradient (1/M) sum_m (r_{k_c(m)} eps^(m) - p). Samples
// must already be direction-transformed.
inline std::vector<double> sample_subgradient(const FleetSpec& fleet, std::span<const double> prices,
                                              const Profile& profile,
                                              std::span<const DeploymentSample> samples) {
  if (samples.empty()) throw InvalidInput("subgradient needs at least one sample");
  if (prices.size() != profile.size()) throw InvalidInput("prices and profile differ in length");
  const std::size_t n = profile.size();
  std::vector<double> g(n, 0.0);
  for (const auto& s : samples) {
    const double rk = fleet.reward(critical_type(fleet, deployed_total(profile, s)));
    for (std::size_t i = 0; i < n; ++i) g[i] += rk * s[i];
  }
  const double inv_m = 1.0 / static_cast<double>(samples.size());
  for (std::size_t i = 0; i < n; ++i) g[i] = g[i] * inv_m - prices[i];
  return g;
}

namespace detail {

// Projected subgradient loop shared by the model-based and empirical solvers.
// `batch_gradient(profile, rng)` returns the averaged batch subgradient.
template <typename BatchGradient>
SgdResult projected_sgd(std::size_t programs, double cap, double r_max, double p_max,
                        const SgdConfig& cfg, BatchGradient&& batch_gradient) {
  if (cfg.iterations == 0) throw InvalidInput("iterations must be at least 1");
  if (cfg.batch == 0) throw InvalidInput("batch must be at least 1");
  if (cfg.step_scale && !(*cfg.step_scale > 0.0)) throw InvalidInput("step scale must be positive");

  const double diameter = feasible_diameter(programs, cap);
  const double g_bound = gradient_bound(programs, r_max, p_max);
  double scale = 0.0;
  if (cfg.step_scale) {
    scale = *cfg.step_scale;
  } else if (g_bound > 0.0) {
    scale = diameter / g_bound;
  }

  Rng rng = make_rng(cfg.seed, 0x5ed);
  Profile current(programs);
  std::vector<double> sum(programs, 0.0);
  SgdResult result;
  if (cfg.record_trajectory) result.trajectory.reserve(cfg.iterations);

  std::vector<double> next(programs);
  for (std::size_t j = 1; j <= cfg.iterations; ++j) {
    for (std::size_t i = 0; i < programs; ++i) sum[i] += current[i];
    if (cfg.record_trajectory) result.trajectory.push_back(current);
    if (j == cfg.iterations) break;  // c^(J+1) is never averaged
    const std::vector<double> g = batch_gradient(current, rng);
    const double alpha = scale / std::sqrt(static_cast<double>(j));
    for (std::size_t i = 0; i < programs; ++i) next[i] = current[i] - alpha * g[i];
    current = project_feasible(next, cap);
  }

  result.profile = Profile(programs);
  for (std::size_t i = 0; i < programs; ++i) {
    result.profile[i] = sum[i] / static_cast<double>(cfg.iterations);
  }
  result.profile = project_feasible(result.profile, cap);
  result.bound = suboptimality_bound(cfg.iterations, programs, r_max, p_max, cap);
  return result;
}

}  // namespace detail

// Algorithm for min E[cost(eps, c)] over the feasible set. `sampler(rng)`
// draws one direction-transformed DeploymentSample.
template <typename Sampler>
  requires std::invocable<Sampler&, Rng&>
SgdResult solve(const FleetSpec& fleet, std::span<const double> prices, Sampler&& sampler,
                const SgdConfig& cfg) {
  const std::size_t n = prices.size();
  if (n == 0) throw InvalidInput("no programs to optimise over");
  double p_max = 0.0;
  for (double p : prices) p_max = std::max(p_max, p);
  std::vector<DeploymentSample> batch(cfg.batch);
  return detail::projected_sgd(
      n, fleet.total_capacity_mw(), fleet.max_reward(), p_max, cfg,
      [&](const Profile& c, Rng& rng) {
        for (auto& s : batch) {
          s = sampler(rng);
          if (s.size() != n) throw InvalidInput("sampler returned wrong dimension");
        }
        return sample_subgradient(fleet, prices, c, batch);
      });
}

// Same iteration over an empirical distribution: each batch element is a slot
// drawn uniformly (with replacement) from `slots`, with its own rewards and
// prices.
inline SgdResult solve_empirical(std::span<const SlotInstance> slots, const SgdConfig& cfg) {
  if (slots.empty()) throw InvalidInput("no slots to optimise over");
  const std::size_t n = slots.front().prices.size();
  if (n == 0) throw InvalidInput("no programs to optimise over");
  double r_max = 0.0;
  double p_max = 0.0;
  double cap = slots.front().fleet.total_capacity_mw();
  for (const auto& s : slots) {
    if (s.prices.size() != n || s.epsilon.size() != n) {
      throw InvalidInput("slots disagree on program count");
    }
    r_max = std::max(r_max, s.fleet.max_reward());
    for (double p : s.prices) p_max = std::max(p_max, p);
    cap = std::min(cap, s.fleet.total_capacity_mw());
  }
  return detail::projected_sgd(n, cap, r_max, p_max, cfg, [&](const Profile& c, Rng& rng) {
    std::vector<double> g(n, 0.0);
    for (std::size_t m = 0; m < cfg.batch; ++m) {
      const auto idx = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(slots.size()));
      const auto gm = slot_subgradient(slots[std::min(idx, slots.size() - 1)], c);
      for (std::size_t i = 0; i < n; ++i) g[i] += gm[i];
    }
    for (double& v : g) v /= static_cast<double>(cfg.batch);
    return g;
  });
}

}  // namespace minerflex
