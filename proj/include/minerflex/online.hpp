#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/projection.hpp"
#include "minerflex/sgd.hpp"

namespace minerflex {

struct OgdConfig {
  std::size_t horizon = 0;    // T; 0 means every supplied round
  std::size_t learners = 24;  // one learner per hour of day
  // Defaults follow the regret analysis: G = sqrt(N) max(r_max, p_max),
  // D = C^M (N = 1) or sqrt(2) C^M.
  std::optional<double> grad_bound;
  std::optional<double> diameter;
  std::optional<double> r_max;
  std::optional<double> p_max;
};

struct RoundOutcome {
  Profile profile_played;
  double cost_incurred = 0.0;
  std::vector<double> gradient;
  std::size_t learner = 0;
  double cumulative_regret = 0.0;  // against the final hindsight profile
};

struct RegretReport {
  double static_regret = 0.0;
  double average_regret = 0.0;
  Profile hindsight_profile;
  double hindsight_cost = 0.0;
  double played_cost = 0.0;
  double bound = 0.0;
  double r_max = 0.0;
  double p_max = 0.0;
  double grad_bound = 0.0;
  double diameter = 0.0;
};

struct OnlineRun {
  std::vector<RoundOutcome> rounds;
  RegretReport report;
};

inline double regret_bound(std::size_t rounds, std::size_t programs, double cap, double r_max,
                           double p_max) {
  return 1.5 * gradient_bound(programs, r_max, p_max) * feasible_diameter(programs, cap) *
         std::sqrt(static_cast<double>(rounds));
}

inline Profile ogd_step(const Profile& current, std::span<const double> gradient, std::size_t t,
                        double step_scale, double cap) {
  if (t == 0) throw InvalidInput("online rounds are numbered from 1");
  if (gradient.size() != current.size()) throw InvalidInput("gradient has the wrong dimension");
  const double eta = step_scale / std::sqrt(static_cast<double>(t));
  std::vector<double> next(current.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(gradient[i])) throw InvalidInput("non-finite gradient");
    next[i] = current[i] - eta * gradient[i];
  }
  return project_feasible(next, cap);
}

// eta_t = D / (G sqrt(t)).
inline Profile ogd_step(const Profile& current, std::span<const double> gradient, std::size_t t,
                        double diameter, double grad_bound, double cap) {
  const double scale = grad_bound > 0.0 ? diameter / grad_bound : 0.0;
  return ogd_step(current, gradient, t, scale, cap);
}

inline double total_cost(std::span<const SlotInstance> rounds, const Profile& c) {
  double s = 0.0;
  for (const auto& r : rounds) s += slot_cost(r, c);
  return s;
}

namespace detail {

inline std::vector<double> total_subgradient(std::span<const SlotInstance> rounds,
                                             const Profile& c) {
  std::vector<double> g(c.size(), 0.0);
  for (const auto& r : rounds) {
    const auto gr = slot_subgradient(r, c);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += gr[i];
  }
  return g;
}

// Range of s for which origin + s * dir stays feasible.
inline std::pair<double, double> feasible_interval(const Profile& origin,
                                                   std::span<const double> dir, double cap) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  double dsum = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i) {
    dsum += dir[i];
    if (dir[i] > 0.0) lo = std::max(lo, -origin[i] / dir[i]);
    if (dir[i] < 0.0) hi = std::min(hi, -origin[i] / dir[i]);
  }
  const double slack = cap - origin.total();
  if (dsum > 0.0) hi = std::min(hi, slack / dsum);
  if (dsum < 0.0) lo = std::max(lo, slack / dsum);
  return {std::min(lo, 0.0), std::max(hi, 0.0)};
}

// Exact minimum of the summed piecewise-linear cost along a feasible segment.
// The sum is linear between the points where some round's deployed total
// crosses a cumulative capacity; the slope on each piece is nondecreasing, so
// a binary search over the pieces finds the first one that stops descending.
inline Profile line_minimum(std::span<const SlotInstance> rounds, const Profile& origin,
                            std::span<const double> dir, double cap) {
  auto [s_lo, s_hi] = feasible_interval(origin, dir, cap);
  if (!(s_hi > s_lo)) return origin;
  std::vector<double> knots{s_lo, s_hi};
  for (const auto& r : rounds) {
    double s0 = 0.0;
    double sd = 0.0;
    for (std::size_t i = 0; i < origin.size(); ++i) {
      if (!r.is_observed(i)) continue;
      s0 += r.epsilon[i] * origin[i];
      sd += r.epsilon[i] * dir[i];
    }
    if (sd == 0.0) continue;
    double cumulative = 0.0;
    for (std::size_t k = 0; k + 1 < r.fleet.size(); ++k) {
      cumulative += r.fleet.capacity(k);
      const double s = (cumulative - s0) / sd;
      if (s > s_lo && s < s_hi) knots.push_back(s);
    }
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  auto point = [&](double s) {
    Profile p = origin;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::max(0.0, origin[i] + s * dir[i]);
    return p;
  };
  auto slope_on = [&](std::size_t piece) {
    const Profile mid = point(0.5 * (knots[piece] + knots[piece + 1]));
    const auto g = total_subgradient(rounds, mid);
    double d = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) d += g[i] * dir[i];
    return d;
  };
  // First piece whose slope is >= 0; the minimum sits at its left knot.
  std::size_t lo = 0;
  std::size_t hi = knots.size() - 1;  // number of pieces
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (slope_on(mid) >= 0.0) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return project_feasible(point(knots[lo]), cap);
}

inline double golden_minimize(double a, double b, int iterations, auto&& f) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < iterations && b - a > 0.0; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace detail

struct HindsightResult {
  Profile profile;
  double total_cost = 0.0;
};

// Best fixed profile for the summed round costs. One or two programs are
// solved exactly (nested line minimisation on the convex piecewise-linear
// sum); more programs use projected subgradient descent with diminishing steps
// followed by exact line searches along coordinate and exchange directions
// until no direction improves.
inline HindsightResult hindsight_optimum(std::span<const SlotInstance> rounds, double cap) {
  if (rounds.empty()) throw InvalidInput("hindsight optimum needs at least one round");
  const std::size_t n = rounds.front().prices.size();
  for (const auto& r : rounds) {
    if (r.prices.size() != n || r.epsilon.size() != n) {
      throw InvalidInput("rounds disagree on program count");
    }
  }
  auto finish = [&](Profile p) {
    p = project_feasible(p, cap);
    const double v = total_cost(rounds, p);
    // The empty profile is always a candidate.
    const Profile zero(n);
    const double z = total_cost(rounds, zero);
    if (z < v) return HindsightResult{zero, z};
    return HindsightResult{p, v};
  };
  if (n == 0) return {Profile(0), total_cost(rounds, Profile(0))};

  if (n == 1) {
    const std::vector<double> dir{1.0};
    return finish(detail::line_minimum(rounds, Profile(1), dir, cap));
  }
  if (n == 2) {
    const std::vector<double> dir{0.0, 1.0};
    auto inner = [&](double c1) {
      return detail::line_minimum(rounds, Profile(std::vector<double>{c1, 0.0}), dir, cap);
    };
    const double c1 = detail::golden_minimize(0.0, cap, 120, [&](double x) {
      return total_cost(rounds, inner(x));
    });
    HindsightResult best = finish(inner(c1));
    for (double edge : {0.0, cap}) {
      HindsightResult e = finish(inner(edge));
      if (e.total_cost < best.total_cost) best = e;
    }
    return best;
  }

  // Projected subgradient descent on the exact sum.
  double r_max = 0.0;
  double p_max = 0.0;
  for (const auto& r : rounds) {
    r_max = std::max(r_max, r.fleet.max_reward());
    for (double p : r.prices) p_max = std::max(p_max, p);
  }
  const double g_bound = gradient_bound(n, r_max, p_max) * static_cast<double>(rounds.size());
  const double scale = g_bound > 0.0 ? feasible_diameter(n, cap) / g_bound : 0.0;
  Profile c(n);
  Profile best = c;
  double best_val = total_cost(rounds, c);
  for (std::size_t j = 1; j <= 4000 && scale > 0.0; ++j) {
    const auto g = detail::total_subgradient(rounds, c);
    c = ogd_step(c, g, j, scale, cap);
    const double v = total_cost(rounds, c);
    if (v < best_val) {
      best_val = v;
      best = c;
    }
  }
  // Polish.
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    dirs.push_back(e);
    for (std::size_t j = i + 1; j < n; ++j) {
      std::vector<double> x(n, 0.0);
      x[i] = 1.0;
      x[j] = -1.0;
      dirs.push_back(x);
    }
  }
  for (int sweep = 0; sweep < 200; ++sweep) {
    const double before = best_val;
    for (const auto& d : dirs) {
      Profile trial = detail::line_minimum(rounds, best, d, cap);
      const double v = total_cost(rounds, trial);
      if (v < best_val) {
        best_val = v;
        best = trial;
      }
    }
    if (!(best_val < before - 1e-12 * std::max(1.0, std::abs(before)))) break;
  }
  return finish(best);
}

// Online gradient descent over revealed slot costs. Each round is committed
// before its cost is revealed; learners are keyed by hour of day (or round
// index when the hour is unknown) and keep independent step counters.
inline OnlineRun run_online(std::span<const SlotInstance> rounds, const OgdConfig& cfg) {
  if (rounds.empty()) throw InvalidInput("no rounds to simulate");
  if (cfg.learners == 0) throw InvalidInput("need at least one learner");
  const std::size_t horizon = cfg.horizon == 0 ? rounds.size() : cfg.horizon;
  if (horizon > rounds.size()) throw InvalidInput("horizon exceeds the number of rounds");
  rounds = rounds.first(horizon);
  const std::size_t n = rounds.front().prices.size();
  double cap = rounds.front().fleet.total_capacity_mw();
  double r_max_seen = 0.0;
  double p_max_seen = 0.0;
  for (const auto& r : rounds) {
    if (r.prices.size() != n || r.epsilon.size() != n ||
        (!r.observed.empty() && r.observed.size() != n)) {
      throw InvalidInput("rounds disagree on program count");
    }
    cap = std::min(cap, r.fleet.total_capacity_mw());
    r_max_seen = std::max(r_max_seen, r.fleet.max_reward());
    for (double p : r.prices) p_max_seen = std::max(p_max_seen, p);
  }

  OnlineRun run;
  RegretReport& rep = run.report;
  rep.r_max = cfg.r_max.value_or(r_max_seen);
  rep.p_max = cfg.p_max.value_or(p_max_seen);
  rep.grad_bound = cfg.grad_bound.value_or(gradient_bound(n, rep.r_max, rep.p_max));
  rep.diameter = cfg.diameter.value_or(feasible_diameter(n, cap));
  const double scale = rep.grad_bound > 0.0 ? rep.diameter / rep.grad_bound : 0.0;

  std::vector<Profile> state(cfg.learners, Profile(n));
  std::vector<std::size_t> steps(cfg.learners, 0);
  run.rounds.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    const SlotInstance& slot = rounds[t];
    const std::size_t learner =
        slot.hour >= 0 ? static_cast<std::size_t>(slot.hour) % cfg.learners : t % cfg.learners;
    RoundOutcome out;
    out.learner = learner;
    out.profile_played = state[learner];
    out.cost_incurred = slot_cost(slot, out.profile_played);
    out.gradient = slot_subgradient(slot, out.profile_played);
    state[learner] = ogd_step(state[learner], out.gradient, ++steps[learner], scale, cap);
    run.rounds.push_back(std::move(out));
  }

  const HindsightResult best = hindsight_optimum(rounds, cap);
  rep.hindsight_profile = best.profile;
  rep.hindsight_cost = best.total_cost;
  double cumulative = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    rep.played_cost += run.rounds[t].cost_incurred;
    cumulative += run.rounds[t].cost_incurred - slot_cost(rounds[t], best.profile);
    run.rounds[t].cumulative_regret = cumulative;
  }
  rep.static_regret = rep.played_cost - rep.hindsight_cost;
  rep.average_regret = rep.static_regret / static_cast<double>(horizon);
  rep.bound = regret_bound(horizon, n, cap, rep.r_max, rep.p_max);
  return run;
}

// Static regret of every prefix: the played cost of rounds 1..t minus the
// best fixed profile for those rounds alone. Rounds off the stride (except
// the last) hold NaN.
inline std::vector<double> regret_curve(std::span<const SlotInstance> rounds, const OnlineRun& run,
                                        std::size_t stride = 1) {
  if (stride == 0) throw InvalidInput("regret stride must be at least 1");
  const std::size_t horizon = run.rounds.size();
  if (horizon > rounds.size()) throw InvalidInput("run is longer than the supplied rounds");
  double cap = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < horizon; ++t) cap = std::min(cap, rounds[t].fleet.total_capacity_mw());
  std::vector<double> out(horizon, std::numeric_limits<double>::quiet_NaN());
  double played = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    played += run.rounds[t].cost_incurred;
    if ((t + 1) % stride != 0 && t + 1 != horizon) continue;
    const HindsightResult best = hindsight_optimum(rounds.first(t + 1), cap);
    out[t] = played - best.total_cost;
  }
  return out;
}

}  // namespace minerflex
