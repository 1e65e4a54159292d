#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/projection.hpp"
#include "minerflex/random.hpp"

namespace minerflex {

// Exponential(lambda) restricted to [0, 1].
struct TruncatedExponential {
  double lambda = 1.0;
};

// Reg-down is deployed with probability theta, reg-up otherwise; never both.
struct RegJointModel {
  double theta = 0.5;
  TruncatedExponential up;
  TruncatedExponential down;
};

// Two machine types (canonical order, so type 0 is the cheaper one to shed)
// and a reg-up/reg-down pair.
struct RegInstance {
  FleetSpec fleet;
  double p_up = 0.0;
  double p_dn = 0.0;
  RegJointModel model;
};

namespace detail {

inline constexpr double kSmallLambda = 1e-4;

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw InvalidInput("truncated exponential rate must be positive");
  }
}

// (1 - e^{-lambda x}) / (1 - e^{-lambda}), accurate for small lambda.
inline double truncexp_cdf_ratio(double lambda, double x) {
  return std::expm1(-lambda * x) / std::expm1(-lambda);
}

}  // namespace detail

inline double truncexp_pdf(const TruncatedExponential& dist, double x) {
  if (x < 0.0 || x > 1.0) return 0.0;
  const double l = dist.lambda;
  detail::check_lambda(l);
  if (l < detail::kSmallLambda) {
    return 1.0 + l * (0.5 - x) + l * l * (1.0 / 12.0 - x / 2.0 + x * x / 2.0);
  }
  return l * std::exp(-l * x) / -std::expm1(-l);
}

// E[X] = (1 - (lambda + 1) e^{-lambda}) / (lambda (1 - e^{-lambda})),
// evaluated as 1/lambda - 1/(e^lambda - 1) to avoid cancellation.
inline double truncexp_mean(const TruncatedExponential& dist) {
  const double l = dist.lambda;
  detail::check_lambda(l);
  if (l < detail::kSmallLambda) return 0.5 - l / 12.0;
  return 1.0 / l - 1.0 / std::expm1(l);
}

// Inverse of truncexp_mean on (0, 0.5) by bisection; the mean is strictly
// decreasing in lambda.
inline TruncatedExponential fit_lambda(double target_mean) {
  if (!(target_mean > 0.0)) throw InvalidInput("target mean must be positive");
  if (!(target_mean < 0.5)) {
    throw InvalidInput("target mean must be below 0.5 for a decreasing truncated exponential");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (truncexp_mean({hi}) > target_mean) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericalFailure("fit_lambda failed to bracket the target mean");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double m = truncexp_mean({mid});
    if (std::abs(m - target_mean) <= 1e-15) return {mid};
    (m > target_mean ? lo : hi) = mid;
  }
  const double lo_err = lo > 0.0 ? std::abs(truncexp_mean({lo}) - target_mean)
                                 : std::numeric_limits<double>::infinity();
  const double hi_err = std::abs(truncexp_mean({hi}) - target_mean);
  const double best = lo_err < hi_err ? lo : hi;
  if (std::min(lo_err, hi_err) > 1e-10) throw NumericalFailure("fit_lambda did not converge");
  return {best};
}

// Inverse-CDF draw: X = -ln(1 - U (1 - e^{-lambda})) / lambda.
inline double sample_truncexp(const TruncatedExponential& dist, Rng& rng) {
  const double u = uniform01(rng);
  const double l = dist.lambda;
  const double x = -std::log1p(u * std::expm1(-l)) / l;
  return std::clamp(x, 0.0, 1.0);
}

// Returns (eps_up, eps_dn); exactly one of them is zero.
inline std::pair<double, double> sample_joint(const RegJointModel& model, Rng& rng) {
  const bool down = uniform01(rng) < model.theta;
  if (down) return {0.0, sample_truncexp(model.down, rng)};
  return {sample_truncexp(model.up, rng), 0.0};
}

inline void validate(const RegJointModel& m) {
  if (!(m.theta >= 0.0 && m.theta <= 1.0)) throw InvalidInput("theta must lie in [0, 1]");
  detail::check_lambda(m.up.lambda);
  detail::check_lambda(m.down.lambda);
}

inline void validate(const RegInstance& inst) {
  if (inst.fleet.size() != 2) {
    throw InvalidInput("regulation closed form needs exactly two machine types");
  }
  validate(inst.model);
}

// Raw parameters of the closed form. Kept separate from RegInstance so the
// expressions can be evaluated with r1 == r2, which a canonical fleet would
// have merged.
struct RegParams {
  double r1 = 0.0;   // reward of the type shed first
  double r2 = 0.0;   // reward of the efficient type
  double cap1 = 0.0;  // capacity of the type shed first, c_1^M
  double cap_total = 0.0;
  double p_up = 0.0;
  double p_dn = 0.0;
  RegJointModel model;
};

inline RegParams reg_params(const RegInstance& inst) {
  validate(inst);
  return {inst.fleet.reward(0), inst.fleet.reward(1), inst.fleet.capacity(0),
          inst.fleet.total_capacity_mw(), inst.p_up, inst.p_dn, inst.model};
}

// Conditional costs given which program is deployed. Each piece is evaluated
// from its own expression, regardless of which region (c_up, c_dn) lies in,
// so boundary continuity can be checked directly. dn2 needs c_dn > 0 and up2
// needs c_up > 0.
struct RegBranchCosts {
  double dn1, dn2;
  double up1, up2, up3;
};

inline RegBranchCosts reg_branch_costs(const RegParams& q, double c_up, double c_dn) {
  const double l1 = q.model.up.lambda;
  const double l2 = q.model.down.lambda;
  const double m1 = truncexp_mean(q.model.up);
  const double m2 = truncexp_mean(q.model.down);
  const double dr = q.r1 - q.r2;
  const double norm1 = -std::expm1(-l1);  // 1 - e^{-lambda_1}
  const double norm2 = -std::expm1(-l2);

  RegBranchCosts b{};
  // Reg-down deployed: eps_up = 0 and (1 - eps_dn) c_dn is shed.
  b.dn1 = -q.p_up * c_up - q.p_dn * c_dn + c_dn * q.r1 * (1.0 - m2);
  b.dn2 = std::numeric_limits<double>::quiet_NaN();
  if (c_dn > 0.0) {
    const double a = 1.0 - q.cap1 / c_dn;
    const double excess =
        (q.cap1 - c_dn) / norm2 + c_dn * (-std::expm1(-l2 * a)) / (l2 * norm2);
    b.dn2 = b.dn1 + dr * excess;
  }
  // Reg-up deployed: eps_dn = 0, so all of c_dn is shed plus eps_up c_up.
  b.up1 = c_up * (q.r1 * m1 - q.p_up) + c_dn * (q.r1 - q.p_dn);
  b.up2 = std::numeric_limits<double>::quiet_NaN();
  if (c_up > 0.0) {
    const double lower = (q.cap1 - c_dn) / c_up;
    const double excess = (c_up + c_dn - q.cap1) * std::exp(-l1) / norm1 +
                          c_up * (std::exp(-l1) - std::exp(-l1 * lower)) / (l1 * norm1);
    b.up2 = b.up1 + dr * excess;
  }
  b.up3 = b.up1 + dr * (q.cap1 - c_dn - c_up * m1);
  return b;
}

struct RegCost {
  double expected = 0.0;
  double given_down = 0.0;  // cost_dn1 or cost_dn2
  double given_up = 0.0;    // cost_up1, cost_up2 or cost_up3
  int down_case = 1;
  int up_case = 1;
};

inline RegCost expected_reg_cost_detail(const RegParams& q, double c_up, double c_dn) {
  const double tol = 1e-9 * std::max(1.0, q.cap_total);
  if (!(c_up >= -tol && c_dn >= -tol) || c_up + c_dn > q.cap_total + tol) {
    throw InvalidInput("regulation profile outside the feasible region");
  }
  c_up = std::max(c_up, 0.0);
  c_dn = std::max(c_dn, 0.0);
  const RegBranchCosts b = reg_branch_costs(q, c_up, c_dn);
  RegCost out;
  if (c_dn <= q.cap1) {
    out.down_case = 1;
    out.given_down = b.dn1;
  } else {
    out.down_case = 2;
    out.given_down = b.dn2;
  }
  if (c_up + c_dn <= q.cap1) {
    out.up_case = 1;
    out.given_up = b.up1;
  } else if (c_dn < q.cap1) {
    out.up_case = 2;
    out.given_up = b.up2;
  } else {
    out.up_case = 3;
    out.given_up = b.up3;
  }
  const double theta = q.model.theta;
  out.expected = theta * out.given_down + (1.0 - theta) * out.given_up;
  return out;
}

inline double expected_reg_cost(const RegInstance& inst, double c_up, double c_dn) {
  return expected_reg_cost_detail(reg_params(inst), c_up, c_dn).expected;
}

namespace detail {

inline double reg_objective(const RegParams& q, double c_up, double c_dn) {
  return expected_reg_cost_detail(q, c_up, c_dn).expected;
}

}  // namespace detail

// Minimises the closed-form expected cost: best point of a 100 x 100
// feasibility grid, then projected gradient descent with central-difference
// gradients and backtracking.
inline Profile solve_reg_profile(const RegInstance& inst) {
  const RegParams q = reg_params(inst);
  const double cap = q.cap_total;
  if (cap <= 0.0) return Profile(2);

  constexpr int kGrid = 100;
  const double h = cap / (kGrid - 1);
  std::array<double, 2> best{0.0, 0.0};
  double best_val = detail::reg_objective(q, 0.0, 0.0);
  for (int i = 0; i < kGrid; ++i) {
    for (int j = 0; i + j < kGrid; ++j) {
      const double cu = i * h;
      const double cd = j * h;
      if (cu + cd > cap) continue;
      const double v = detail::reg_objective(q, cu, cd);
      if (v < best_val) {
        best_val = v;
        best = {cu, cd};
      }
    }
  }

  const double fd = 1e-7 * cap;
  auto objective_at = [&](const Profile& p) { return detail::reg_objective(q, p[0], p[1]); };
  auto gradient_at = [&](const Profile& p) {
    std::array<double, 2> g{};
    for (int i = 0; i < 2; ++i) {
      Profile lo = p;
      Profile hi = p;
      lo[i] = p[i] - fd;
      hi[i] = p[i] + fd;
      // One-sided near the boundary so both evaluations stay feasible.
      if (lo[i] < 0.0) lo[i] = p[i];
      if (hi.total() > cap) hi[i] = p[i];
      const double span = hi[i] - lo[i];
      g[i] = span > 0.0 ? (objective_at(hi) - objective_at(lo)) / span : 0.0;
    }
    return g;
  };

  Profile x(std::vector<double>{best[0], best[1]});
  double fx = best_val;
  double step = h;
  const double scale = std::max({q.r1, q.r2, q.p_up, q.p_dn, 1.0});
  for (int it = 0; it < 5000 && step > 1e-13 * cap; ++it) {
    const auto g = gradient_at(x);
    const double gnorm = std::hypot(g[0], g[1]);
    if (gnorm <= 1e-14 * scale) break;
    bool improved = false;
    double t = step;
    while (t > 1e-13 * cap) {
      const std::array<double, 2> trial{x[0] - t * g[0] / gnorm, x[1] - t * g[1] / gnorm};
      const Profile y = project_feasible(std::span<const double>(trial), cap);
      const double fy = objective_at(y);
      if (fy < fx) {
        x = y;
        fx = fy;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    step = improved ? std::min(2.0 * t, cap) : t * 0.5;
  }
  return x;
}

}  // namespace minerflex
