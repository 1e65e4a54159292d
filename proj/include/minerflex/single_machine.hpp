#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"

namespace minerflex {

// First two moments of a program's deployment rate plus its price.
struct ProgramStats {
  double price = 0.0;
  double mean_eps = 0.0;
  double var_eps = 0.0;
};

struct RiskConfig {
  double risk_weight = 0.0;
};

inline void validate(const ProgramStats& s) {
  if (!std::isfinite(s.price)) throw InvalidInput("program price must be finite");
  if (!(s.mean_eps >= 0.0 && s.mean_eps <= 1.0)) throw InvalidInput("mean deployment outside [0, 1]");
  if (!(s.var_eps >= 0.0)) throw InvalidInput("deployment variance must be nonnegative");
  if (s.var_eps > s.mean_eps * (1.0 - s.mean_eps) + 1e-12) {
    throw InvalidInput("deployment variance exceeds mean * (1 - mean)");
  }
}

// Per-unit expected cost r E[eps_i] - p_i.
inline double unit_cost(const ProgramStats& s, double r) { return r * s.mean_eps - s.price; }

// Linear program for one machine type: all capacity to the cheapest program
// if its per-unit cost is nonpositive, nothing otherwise. Ties between
// programs go to the lowest index.
inline Profile best_program(std::span<const ProgramStats> programs, double r, double cap) {
  if (programs.empty()) throw InvalidInput("no programs");
  if (!(r >= 0.0)) throw ModelViolation("mining reward must be nonnegative");
  std::size_t best = 0;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    validate(programs[i]);
    if (unit_cost(programs[i], r) < unit_cost(programs[best], r)) best = i;
  }
  Profile out(programs.size());
  if (unit_cost(programs[best], r) <= 0.0) out[best] = cap;
  return out;
}

inline double risk_objective(std::span<const ProgramStats> programs, double r, const Profile& c,
                             double risk_weight) {
  double v = 0.0;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    v += c[i] * unit_cost(programs[i], r) + risk_weight * c[i] * c[i] * r * r * programs[i].var_eps;
  }
  return v;
}

struct RiskSolution {
  Profile profile;
  double multiplier = 0.0;  // mu on sum(c) <= cap
};

namespace detail {

// c_i(mu) = max(0, -(a_i + mu) / (2 q_i)) over the positive-variance
// coordinates.
inline double quadratic_mass(std::span<const double> a, std::span<const double> q,
                             std::span<const std::size_t> idx, double mu) {
  double s = 0.0;
  for (std::size_t i : idx) s += std::max(0.0, -(a[i] + mu) / (2.0 * q[i]));
  return s;
}

// Smallest mu >= 0 with quadratic_mass(mu) <= cap. Bisection brackets the
// active set; mu is then solved exactly on that linear piece.
inline double budget_multiplier(std::span<const double> a, std::span<const double> q,
                                std::span<const std::size_t> idx, double cap) {
  if (quadratic_mass(a, q, idx, 0.0) <= cap) return 0.0;
  double lo = 0.0;
  double hi = 0.0;
  for (std::size_t i : idx) hi = std::max(hi, -a[i]);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (quadratic_mass(a, q, idx, mid) > cap ? lo : hi) = mid;
  }
  // Active set at the bracket: coordinates still positive at lo.
  double num = cap;
  double den = 0.0;
  for (std::size_t i : idx) {
    if (-(a[i] + lo) > 0.0) {
      num += a[i] / (2.0 * q[i]);
      den += 1.0 / (2.0 * q[i]);
    }
  }
  if (den > 0.0) {
    const double mu = -num / den;
    if (mu >= lo && mu <= hi) return mu;
  }
  return hi;
}

}  // namespace detail

// Minimises sum_i [c_i (r E[eps_i] - p_i) + lambda c_i^2 r^2 Var[eps_i]] over
// {c >= 0, sum c <= cap} through its KKT conditions. Zero-variance programs
// stay linear: the cheapest of them takes the residual capacity when its
// per-unit cost undercuts the budget multiplier.
inline RiskSolution risk_aware_solve_detail(std::span<const ProgramStats> programs, double r,
                                            double cap, const RiskConfig& risk) {
  if (programs.empty()) throw InvalidInput("no programs");
  if (!(risk.risk_weight >= 0.0)) throw InvalidInput("risk weight must be nonnegative");
  if (!(r >= 0.0)) throw ModelViolation("mining reward must be nonnegative");
  const std::size_t n = programs.size();
  std::vector<double> a(n);
  std::vector<double> q(n);
  std::vector<std::size_t> quad;
  std::size_t best_linear = n;
  for (std::size_t i = 0; i < n; ++i) {
    validate(programs[i]);
    a[i] = unit_cost(programs[i], r);
    q[i] = risk.risk_weight * r * r * programs[i].var_eps;
    if (q[i] > 0.0) {
      quad.push_back(i);
    } else if (best_linear == n || a[i] < a[best_linear]) {
      best_linear = i;
    }
  }
  if (quad.empty()) {
    RiskSolution s{best_program(programs, r, cap), 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      if (s.profile[i] > 0.0) s.multiplier = -a[i];
    }
    return s;
  }

  double mu = detail::budget_multiplier(a, q, quad, cap);
  bool fill_linear = false;
  if (best_linear < n && a[best_linear] <= 0.0 && mu <= -a[best_linear]) {
    mu = -a[best_linear];
    fill_linear = true;
  }
  RiskSolution s{Profile(n), mu};
  double used = 0.0;
  for (std::size_t i : quad) {
    s.profile[i] = std::max(0.0, -(a[i] + mu) / (2.0 * q[i]));
    used += s.profile[i];
  }
  // With the budget binding, flat coordinates (tiny q) turn rounding in mu
  // into a visible gap; close it on the largest coordinate.
  if (used > 0.0 && (used > cap || (mu > 0.0 && !fill_linear))) {
    std::size_t top = quad.front();
    for (std::size_t i : quad) {
      if (s.profile[i] > s.profile[top]) top = i;
    }
    s.profile[top] = std::max(0.0, s.profile[top] + (cap - used));
    used = 0.0;
    for (std::size_t i : quad) used += s.profile[i];
  }
  if (fill_linear) s.profile[best_linear] = std::max(0.0, cap - used);
  return s;
}

inline Profile risk_aware_solve(std::span<const ProgramStats> programs, double r, double cap,
                                const RiskConfig& risk) {
  return risk_aware_solve_detail(programs, r, cap, risk).profile;
}

struct ProfileRisk {
  double expected_cost = 0.0;
  double variance = 0.0;
};

// Mean and variance of the slot cost sum_i c_i (eps_i r - p_i), treating
// programs as independent.
inline ProfileRisk profile_risk(std::span<const ProgramStats> programs, double r,
                                const Profile& profile) {
  if (profile.size() != programs.size()) throw InvalidInput("profile and programs differ in length");
  ProfileRisk out;
  for (std::size_t i = 0; i < programs.size(); ++i) {
    out.expected_cost += profile[i] * unit_cost(programs[i], r);
    out.variance += profile[i] * profile[i] * r * r * programs[i].var_eps;
  }
  return out;
}

}  // namespace minerflex
