#pragma once

// Oracle agreement suites. Each one pits a solver against an independent
// reference on generated instances and reports the worst discrepancy. Slow by
// design; the instance counts are parameters so a quick pass is possible.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "minerflex/deployment.hpp"
#include "minerflex/fleet.hpp"
#include "minerflex/online.hpp"
#include "minerflex/oracle.hpp"
#include "minerflex/programs.hpp"
#include "minerflex/random.hpp"
#include "minerflex/regulation.hpp"
#include "minerflex/sgd.hpp"
#include "minerflex/single_machine.hpp"
#include "minerflex/traces.hpp"

namespace minerflex {

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  double max_error = 0.0;  // worst observed discrepancy, in the suite's units
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

class InstanceGen {
 public:
  explicit InstanceGen(std::uint64_t seed) : rng_(make_rng(seed, 0x7e51)) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(rng_); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return lo + std::min(hi - lo, static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(hi - lo + 1)));
  }
  bool coin(double p) { return uniform01(rng_) < p; }
  Rng& rng() { return rng_; }

  // Unsorted machines; rewards sometimes repeat or are zero.
  std::vector<MachineType> machines(std::size_t k) {
    std::vector<MachineType> m;
    for (std::size_t i = 0; i < k; ++i) {
      double r = uniform(0.0, 200.0);
      if (i > 0 && coin(0.1)) r = m[index(0, i - 1)].reward;
      if (coin(0.05)) r = 0.0;
      m.push_back({"m" + std::to_string(i), uniform(1.0, 200.0), 100.0, r});
    }
    return m;
  }

  std::vector<double> prices(std::size_t n, double hi) {
    std::vector<double> p(n);
    for (auto& v : p) v = uniform(0.0, hi);
    return p;
  }

  DeploymentSample epsilon(std::size_t n) {
    DeploymentSample s;
    s.epsilon.resize(n);
    for (auto& v : s.epsilon) {
      const double u = uniform01(rng_);
      v = u < 0.1 ? 0.0 : (u < 0.2 ? 1.0 : uniform01(rng_));
    }
    return s;
  }

  // Point of {c >= 0, sum c <= cap}; a fifth land on the full-capacity face.
  Profile feasible(std::size_t n, double cap) {
    std::vector<double> w(n + 1);
    for (auto& v : w) v = -std::log1p(-uniform01(rng_));
    const bool face = coin(0.2);
    double total = 0.0;
    for (std::size_t i = 0; i < (face ? n : n + 1); ++i) total += w[i];
    Profile c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = total > 0.0 ? cap * w[i] / total : 0.0;
    if (coin(0.1)) c[index(0, n - 1)] = 0.0;
    return c;
  }

 private:
  Rng rng_;
};

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double std_error() const {
    return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
  }
};

template <typename F>
SuiteResult timed(F&& body) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r = body();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

// Greedy allocation against the vertex-enumerating LP oracle.
inline SuiteResult verify_greedy_deployment(std::size_t instances, std::uint64_t seed) {
  return detail::timed([&] {
    SuiteResult r{"greedy_deployment", instances, 0.0, 1e-9, false, {}, 0.0};
    detail::InstanceGen gen(seed);
    for (std::size_t t = 0; t < instances; ++t) {
      const auto machines = gen.machines(gen.index(1, 4));
      const FleetSpec fleet = canonicalize(machines);
      const std::size_t n = gen.index(1, 3);
      const auto prices = gen.prices(n, 100.0);
      const Profile c = gen.feasible(n, fleet.total_capacity_mw());
      const DeploymentSample eps = gen.epsilon(n);
      const Allocation a = allocate_deployment(fleet, deployed_total(c, eps));
      double greedy = 0.0;
      for (std::size_t k = 0; k < fleet.size(); ++k) greedy += fleet.reward(k) * a.d[k];
      for (std::size_t i = 0; i < n; ++i) greedy -= c[i] * prices[i];
      const double oracle = lp_deployment_oracle(machines, prices, c, eps);
      r.max_error = std::max(r.max_error, std::abs(greedy - oracle));
    }
    r.passed = r.max_error <= r.tolerance;
    r.detail = "K<=4, N<=3, |greedy - LP oracle|";
    return r;
  });
}

// Realized cost as the max of the pinned-type affine pieces, and midpoint
// convexity in the profile for a fixed deployment draw.
inline SuiteResult verify_cost_structure(std::size_t points, std::size_t segments, std::uint64_t seed) {
  return detail::timed([&] {
    SuiteResult r{"cost_structure", points + segments, 0.0, 1e-9, false, {}, 0.0};
    detail::InstanceGen gen(seed);
    double max_affine = 0.0;
    double convexity = 0.0;
    for (std::size_t t = 0; t < points; ++t) {
      const FleetSpec fleet = canonicalize(gen.machines(gen.index(1, 4)));
      const std::size_t n = gen.index(1, 3);
      const auto prices = gen.prices(n, 100.0);
      const Profile c = gen.feasible(n, fleet.total_capacity_mw());
      const DeploymentSample eps = gen.epsilon(n);
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < fleet.size(); ++k) best = std::max(best, cost_fixed_k(fleet, prices, c, eps, k));
      max_affine = std::max(max_affine, std::abs(realized_cost(fleet, prices, c, eps) - best));
    }
    for (std::size_t t = 0; t < segments; ++t) {
      const FleetSpec fleet = canonicalize(gen.machines(gen.index(1, 4)));
      const std::size_t n = gen.index(1, 3);
      const auto prices = gen.prices(n, 100.0);
      const double cap = fleet.total_capacity_mw();
      const Profile a = gen.feasible(n, cap);
      const Profile b = gen.feasible(n, cap);
      Profile mid(n);
      for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (a[i] + b[i]);
      const DeploymentSample eps = gen.epsilon(n);
      const double gap = realized_cost(fleet, prices, mid, eps) -
                         0.5 * (realized_cost(fleet, prices, a, eps) + realized_cost(fleet, prices, b, eps));
      convexity = std::max(convexity, gap);
    }
    r.max_error = std::max(max_affine, convexity);
    r.passed = r.max_error <= r.tolerance;
    r.detail = "max-of-affines error " + detail::fmt(max_affine) + ", midpoint convexity slack " +
               detail::fmt(convexity);
    return r;
  });
}

struct SgdConvergenceOptions {
  std::size_t iterations = 10000;
  std::size_t batch = 10;
  std::size_t grid_points = 200;
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 0;
};

// Two machine sets (150 MW and 100 MW) and a reg-up/reg-down pair. The
// averaged SGD profile is scored on the same Monte Carlo sample set as the
// grid, so its excess over the grid optimum is a common-random-numbers
// comparison.
inline SuiteResult verify_sgd_convergence(const SgdConvergenceOptions& o) {
  return detail::timed([&] {
    SuiteResult r{"sgd_convergence", 1, 0.0, 0.0, false, {}, 0.0};
    const std::vector<MachineConfig> machines{{"s9", 150, 130}, {"s19", 100, 110}};
    const FleetSpec fleet = make_fleet(machines, 20000, 60);
    ProgramSet set;
    set.programs = {{"regup", 30, Direction::up, fit_lambda(0.18)},
                    {"regdn", 60, Direction::down, fit_lambda(0.27)}};
    set.regulation = RegulationPairing{0, 1, 0.5};
    const ProgramSampler sampler(set);
    const auto prices = set.prices();

    SgdConfig cfg;
    cfg.iterations = o.iterations;
    cfg.batch = o.batch;
    cfg.seed = derive_seed(o.seed, 1);
    const SgdResult sgd = solve(fleet, prices, sampler, cfg);
    const GridOptimum grid = grid_mc_optimum(fleet, prices, sampler, {o.grid_points, o.mc_samples, o.seed});
    const auto samples = draw_samples(sampler, prices.size(), o.mc_samples, o.seed);
    const MonteCarloEstimate at_sgd = mc_expected_cost(fleet, prices, sgd.profile, samples);

    r.max_error = at_sgd.mean - grid.value.mean;
    r.tolerance = sgd.bound + 3.0 * std::max(at_sgd.std_error, grid.value.std_error);
    r.passed = r.max_error <= r.tolerance;
    r.detail = "sgd (" + detail::fmt(sgd.profile[0]) + ", " + detail::fmt(sgd.profile[1]) + ") cost " +
               detail::fmt(at_sgd.mean) + "; grid (" + detail::fmt(grid.profile[0]) + ", " +
               detail::fmt(grid.profile[1]) + ") cost " + detail::fmt(grid.value.mean) + "; bound " +
               detail::fmt(sgd.bound) + ", se " + detail::fmt(at_sgd.std_error);
    return r;
  });
}

struct RegulationOptions {
  std::size_t samples = 1000000;
  std::vector<double> thetas{0.3, 0.5, 0.7};
  double mean_up = 0.18;
  double mean_dn = 0.27;
  std::uint64_t seed = 0;
};

// Closed-form expected regulation cost against Monte Carlo through the generic
// path (joint draw, direction transform, greedy allocation), plus continuity
// of the branch pieces across both region boundaries.
inline SuiteResult verify_regulation(const RegulationOptions& o) {
  return detail::timed([&] {
    SuiteResult r{"regulation_closed_form", 0, 0.0, 3.0, false, {}, 0.0};
    const std::vector<MachineConfig> machines{{"s9", 150, 130}, {"s19", 100, 110}};
    RegInstance inst;
    inst.fleet = make_fleet(machines, 20000, 60);
    inst.p_up = 30;
    inst.p_dn = 60;
    const double cap = inst.fleet.total_capacity_mw();
    const double cap1 = inst.fleet.capacity(0);
    const std::vector<double> prices{inst.p_up, inst.p_dn};
    const std::vector<Direction> dirs{Direction::up, Direction::down};
    const std::array<double, 5> a{0.05, 0.25, 0.45, 0.65, 0.85};
    const std::array<double, 5> b{0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<Profile> grid;
    for (double ai : a) {
      for (double bj : b) {
        const double cu = ai * cap;
        grid.push_back(Profile({cu, bj * (cap - cu)}));
      }
    }
    std::array<std::size_t, 3> up_cases{};
    double worst_z = 0.0;
    double worst_cont = 0.0;
    for (std::size_t ti = 0; ti < o.thetas.size(); ++ti) {
      inst.model = {o.thetas[ti], fit_lambda(o.mean_up), fit_lambda(o.mean_dn)};
      std::vector<detail::Welford> stats(grid.size());
      Rng rng = make_rng(o.seed, 0x4e9 + ti);
      DeploymentSample raw{{0.0, 0.0}};
      for (std::size_t s = 0; s < o.samples; ++s) {
        const auto [eu, ed] = sample_joint(inst.model, rng);
        raw.epsilon = {eu, ed};
        const DeploymentSample eff = effective_epsilon(raw, dirs);
        for (std::size_t g = 0; g < grid.size(); ++g) stats[g].add(realized_cost(inst.fleet, prices, grid[g], eff));
      }
      const RegParams q = reg_params(inst);
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const RegCost exact = expected_reg_cost_detail(q, grid[g][0], grid[g][1]);
        ++up_cases[exact.up_case - 1];
        const double se = stats[g].std_error();
        const double diff = std::abs(stats[g].mean - exact.expected);
        const double z = se > 0.0 ? diff / se : (diff > 1e-9 ? std::numeric_limits<double>::infinity() : 0.0);
        worst_z = std::max(worst_z, z);
        ++r.cases;
      }
      // Boundaries: c_up + c_dn = c_1 (up1/up2) and c_dn = c_1 (dn1/dn2, up2/up3).
      auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(x)); };
      for (int k = 1; k <= 9; ++k) {
        const double f = k / 10.0;
        const double cu = f * cap1;
        const RegBranchCosts b1 = reg_branch_costs(q, cu, cap1 - cu);
        worst_cont = std::max(worst_cont, rel(b1.up1, b1.up2));
        const double cu2 = f * (cap - cap1);
        const RegBranchCosts b2 = reg_branch_costs(q, cu2, cap1);
        worst_cont = std::max(worst_cont, rel(b2.dn1, b2.dn2));
        worst_cont = std::max(worst_cont, rel(b2.up2, b2.up3));
      }
    }
    const bool covered = up_cases[0] > 0 && up_cases[1] > 0 && up_cases[2] > 0;
    r.max_error = worst_z;
    r.passed = worst_z <= 3.0 && worst_cont <= 1e-7 && covered;
    r.detail = "max |MC - closed form| / se " + detail::fmt(worst_z) + ", boundary continuity " +
               detail::fmt(worst_cont) + " (tol 1e-7), region points " + std::to_string(up_cases[0]) + "/" +
               std::to_string(up_cases[1]) + "/" + std::to_string(up_cases[2]);
    return r;
  });
}

namespace detail {

inline std::vector<ProgramStats> random_stats(InstanceGen& gen, std::size_t n, double zero_var) {
  std::vector<ProgramStats> out(n);
  for (auto& p : out) {
    p.mean_eps = gen.uniform(0.0, 1.0);
    p.var_eps = gen.coin(zero_var) ? 0.0 : gen.uniform(0.0, 1.0) * p.mean_eps * (1.0 - p.mean_eps);
    p.price = gen.uniform(0.0, 150.0);
  }
  return out;
}

// Exact minimum of the linear objective over the lattice {h k : sum k <= G-1}
// by dynamic programming over the capacity budget; equivalent to enumerating
// every lattice point.
inline double lattice_min(std::span<const double> unit_costs, double h, std::size_t points) {
  const std::size_t units = points - 1;
  std::vector<double> f(units + 1, 0.0);
  std::vector<double> next(units + 1);
  for (double a : unit_costs) {
    for (std::size_t budget = 0; budget <= units; ++budget) {
      double best = f[budget];
      for (std::size_t k = 1; k <= budget; ++k) best = std::min(best, f[budget - k] + a * h * static_cast<double>(k));
      next[budget] = best;
    }
    f.swap(next);
  }
  return f[units];
}

}  // namespace detail

inline SuiteResult verify_best_program(std::size_t instances, std::size_t points, std::uint64_t seed) {
  return detail::timed([&] {
    SuiteResult r{"best_program", instances, 0.0, 0.0, false, {}, 0.0};
    detail::InstanceGen gen(seed);
    double worst_ratio = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
      const auto ps = detail::random_stats(gen, gen.index(1, 3), 0.0);
      const double rew = gen.uniform(0.0, 200.0);
      const double cap = gen.uniform(10.0, 300.0);
      const Profile c = best_program(ps, rew, cap);
      std::vector<double> a;
      double p_max = 0.0;
      for (const auto& p : ps) {
        a.push_back(unit_cost(p, rew));
        p_max = std::max(p_max, p.price);
      }
      const double h = cap / static_cast<double>(points - 1);
      const double grid = detail::lattice_min(a, h, points);
      const double gap = std::abs(risk_objective(ps, rew, c, 0.0) - grid);
      const double tol = h * std::max(rew, p_max);
      worst_ratio = std::max(worst_ratio, tol > 0.0 ? gap / tol : (gap > 0.0 ? 1e300 : 0.0));
      r.max_error = std::max(r.max_error, gap);
    }
    r.tolerance = 1.0;
    r.passed = worst_ratio <= 1.0;
    r.detail = "N<=3, " + std::to_string(points) + " points per program; worst gap / (h max(r, p)) " +
               detail::fmt(worst_ratio);
    return r;
  });
}

namespace detail {

// Largest KKT violation of the risk-aware QP in $/MW.
inline double kkt_residual(std::span<const ProgramStats> ps, double r, double cap, double lambda,
                           const RiskSolution& s) {
  const double mu = s.multiplier;
  double worst = std::max(0.0, -mu);
  double sum = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double c = s.profile[i];
    sum += c;
    worst = std::max(worst, -c);
    const double grad = unit_cost(ps[i], r) + 2.0 * lambda * r * r * ps[i].var_eps * c + mu;
    worst = std::max(worst, c > 0.0 ? std::abs(grad) : -grad);
  }
  worst = std::max(worst, sum - cap);
  worst = std::max(worst, std::abs(mu * (cap - sum)) / cap);
  return worst;
}

}  // namespace detail

inline SuiteResult verify_risk_qp(std::size_t instances, std::uint64_t seed) {
  return detail::timed([&] {
    SuiteResult r{"risk_qp", instances, 0.0, 1e-8, false, {}, 0.0};
    detail::InstanceGen gen(seed);
    std::size_t reduction_failures = 0;
    double worst_increase = 0.0;
    for (std::size_t t = 0; t < instances; ++t) {
      const auto ps = detail::random_stats(gen, gen.index(1, 4), 0.2);
      const double rew = gen.uniform(1.0, 200.0);
      const double cap = gen.uniform(10.0, 300.0);
      const double lambda = std::pow(10.0, gen.uniform(-6.0, -1.0));
      const RiskSolution s = risk_aware_solve_detail(ps, rew, cap, {lambda});
      r.max_error = std::max(r.max_error, detail::kkt_residual(ps, rew, cap, lambda, s));
      if (!(risk_aware_solve(ps, rew, cap, {0.0}) == best_program(ps, rew, cap))) ++reduction_failures;
      double prev = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 20; ++k) {
        const double lk = 1e-7 * std::pow(10.0, k * 0.3);
        const double var = profile_risk(ps, rew, risk_aware_solve(ps, rew, cap, {lk})).variance;
        if (std::isfinite(prev)) worst_increase = std::max(worst_increase, (var - prev) / std::max(1.0, prev));
        prev = var;
      }
    }
    // Variance may move by rounding only.
    r.passed = r.max_error <= r.tolerance && reduction_failures == 0 && worst_increase <= 1e-10;
    r.detail = "max KKT residual " + detail::fmt(r.max_error) + ", zero-weight mismatches " +
               std::to_string(reduction_failures) + ", worst relative variance increase " +
               detail::fmt(worst_increase);
    return r;
  });
}

struct OnlineOptions {
  std::size_t adversarial_runs = 200;
  std::size_t stationary_runs = 20;
  std::size_t horizon = 500;
  std::uint64_t seed = 0;
};

namespace detail {

// Bounded adversarial sequence for two programs: rewards, prices and
// deployments switch between regimes chosen to pull the learner back and
// forth, mixed with i.i.d. noise.
inline std::vector<SlotInstance> adversarial_rounds(InstanceGen& gen, std::size_t horizon, double r_max,
                                                    double p_max) {
  const auto machines = gen.machines(gen.index(1, 3));
  std::vector<SlotInstance> out;
  out.reserve(horizon);
  const std::size_t period = gen.index(1, 50);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<MachineType> m = machines;
    for (auto& mt : m) mt.reward = gen.uniform(0.0, r_max);
    SlotInstance s;
    s.fleet = canonicalize(m);
    const bool phase = (t / period) % 2 == 0;
    switch (gen.index(0, 2)) {
      case 0:
        s.prices = {phase ? p_max : 0.0, phase ? 0.0 : p_max};
        s.epsilon.epsilon = {phase ? 0.0 : 1.0, phase ? 1.0 : 0.0};
        break;
      case 1:
        s.prices = gen.prices(2, p_max);
        s.epsilon = gen.epsilon(2);
        break;
      default:
        s.prices = {gen.uniform(0.0, p_max), gen.uniform(0.0, p_max)};
        s.epsilon.epsilon = {phase ? 1.0 : 0.0, gen.uniform(0.0, 1.0)};
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

// Stationary sequence: one draw of rewards, prices and deployment reused
// every round. Rewards come from coin economics on the 150 MW / 100 MW fleet.
inline std::vector<SlotInstance> stationary_rounds(InstanceGen& gen, std::size_t horizon) {
  const std::vector<MachineConfig> machines{{"s9", 150, 130}, {"s19", 100, 110}};
  SlotInstance s;
  s.fleet = make_fleet(machines, gen.uniform(6000.0, 10000.0), gen.uniform(15.0, 35.0));
  s.prices = {gen.uniform(5.0, 40.0), gen.uniform(5.0, 40.0)};
  s.epsilon.epsilon = {sample_truncexp(fit_lambda(0.18), gen.rng()), sample_truncexp(fit_lambda(0.27), gen.rng())};
  return std::vector<SlotInstance>(horizon, s);
}

}  // namespace detail

// Static regret against its bound on adversarial sequences, and the plateau of
// the cumulative regret curve on stationary ones.
inline SuiteResult verify_online(const OnlineOptions& o) {
  return detail::timed([&] {
    SuiteResult r{"online_regret", o.adversarial_runs + o.stationary_runs, 0.0, 1.0, false, {}, 0.0};
    detail::InstanceGen gen(o.seed);
    OgdConfig cfg;
    cfg.learners = 1;
    const double r_max = 200.0;
    const double p_max = 100.0;
    cfg.r_max = r_max;
    cfg.p_max = p_max;
    double worst_ratio = 0.0;
    for (std::size_t run = 0; run < o.adversarial_runs; ++run) {
      const auto rounds = detail::adversarial_rounds(gen, o.horizon, r_max, p_max);
      const OnlineRun res = run_online(rounds, cfg);
      const double cap = rounds.front().fleet.total_capacity_mw();
      const double programs = 2.0;
      const double bound =
          3.0 * cap * std::sqrt(static_cast<double>(o.horizon) * programs / 2.0) * std::max(r_max, p_max);
      worst_ratio = std::max(worst_ratio, res.report.static_regret / bound);
    }

    OgdConfig stationary;
    stationary.learners = 1;
    std::size_t halving_failures = 0;
    std::size_t plateau_failures = 0;
    double worst_avg_ratio = 0.0;
    double worst_tail = 0.0;
    std::size_t evaluated = 0;
    const std::size_t quarter = o.horizon / 4;
    const std::size_t tail_start = o.horizon - o.horizon / 10;
    for (std::size_t run = 0; run < o.stationary_runs; ++run) {
      const auto rounds = detail::stationary_rounds(gen, o.horizon);
      const OnlineRun res = run_online(rounds, stationary);
      const double total = res.rounds.back().cumulative_regret;
      const double scale = rounds.front().fleet.total_capacity_mw() *
                           std::max(rounds.front().fleet.max_reward(), 40.0);
      if (total <= 1e-9 * scale) continue;  // learner matched the optimum outright
      ++evaluated;
      const double avg_t = total / static_cast<double>(o.horizon);
      const double avg_q = res.rounds[quarter - 1].cumulative_regret / static_cast<double>(quarter);
      const double ratio = avg_q > 0.0 ? avg_t / avg_q : std::numeric_limits<double>::infinity();
      const double tail = (total - res.rounds[tail_start - 1].cumulative_regret) / total;
      worst_avg_ratio = std::max(worst_avg_ratio, ratio);
      worst_tail = std::max(worst_tail, tail);
      if (!(avg_t <= 0.5 * avg_q + 1e-12 * scale)) ++halving_failures;
      if (!(tail < 0.05)) ++plateau_failures;
    }
    r.max_error = worst_ratio;
    r.passed = worst_ratio <= 1.0 && halving_failures == 0 && plateau_failures == 0;
    r.detail = "worst regret / bound " + detail::fmt(worst_ratio) + "; stationary: worst avg(T)/avg(T/4) " +
               detail::fmt(worst_avg_ratio) + ", worst tail share " + detail::fmt(worst_tail) + ", evaluated " +
               std::to_string(evaluated) + "/" + std::to_string(o.stationary_runs) + " (rest zero regret), halving failures " +
               std::to_string(halving_failures) + ", plateau failures " + std::to_string(plateau_failures);
    return r;
  });
}

struct StrategyOutcome {
  StrategyReport report;
  std::size_t train_slots = 0;
  std::size_t eval_slots = 0;
};

// Synthesizes `history_hours` of training data ahead of the synthesized window and
// evaluates the four strategies on the window itself.
inline StrategyOutcome strategy_benchmark(SynthesisSpec spec, std::span<const MachineConfig> fleet,
                                          std::size_t history_hours, const SgdConfig& cfg,
                                          std::uint64_t seed, bool clamp_negative = true) {
  const std::size_t eval_hours = spec.hours;
  const auto start = parse_timestamp(spec.start);
  if (!start) throw InvalidInput("synthesis start is not a valid timestamp");
  spec.start = format_timestamp(*start - static_cast<std::int64_t>(history_hours) * 3600);
  spec.hours = eval_hours + history_hours;
  const TraceSet traces = synthesize_traces(spec, seed);
  std::vector<Direction> dirs;
  for (const auto& p : spec.programs) dirs.push_back(p.kind == SynthKind::reg_down ? Direction::down : Direction::up);
  StrategyWindow w;
  w.train_begin = 0;
  w.train_end = history_hours;
  w.eval_begin = history_hours;
  w.eval_end = history_hours + eval_hours;
  StrategyOutcome out;
  out.report = compare_strategies(traces, fleet, dirs, w, cfg, clamp_negative);
  out.train_slots = history_hours == 0 ? eval_hours : history_hours;
  out.eval_slots = eval_hours;
  return out;
}

// Profiles are fitted and scored on the same window unless history_hours
// adds a separate training period; the out-of-sample figures are reported
// alongside when diagnostic_history is nonzero.
inline SuiteResult verify_strategies(const SynthesisSpec& spec, std::span<const MachineConfig> fleet,
                                     std::size_t history_hours, const SgdConfig& cfg, std::uint64_t seed,
                                     std::size_t diagnostic_history = 0) {
  return detail::timed([&] {
    SuiteResult r{"strategy_dominance", 1, 0.0, 0.0, false, {}, 0.0};
    const StrategyReport rep = strategy_benchmark(spec, fleet, history_hours, cfg, seed).report;
    const double worst = std::min({rep.mean_optimized - rep.mean_fixed, rep.mean_optimized - rep.mean_even,
                                   rep.mean_fixed - rep.mean_none, rep.mean_even - rep.mean_none});
    r.max_error = -worst;
    r.passed = worst >= 0.0;
    const double margin = rep.mean_even != 0.0 ? (rep.mean_optimized - rep.mean_even) / std::abs(rep.mean_even) : 0.0;
    r.detail = "mean profit $/h: optimized " + detail::fmt(rep.mean_optimized) + ", fixed " +
               detail::fmt(rep.mean_fixed) + ", even " + detail::fmt(rep.mean_even) + ", none " +
               detail::fmt(rep.mean_none) + "; margin over even split " + detail::fmt(100.0 * margin) + "%";
    if (diagnostic_history > 0) {
      const StrategyReport oos = strategy_benchmark(spec, fleet, diagnostic_history, cfg, seed).report;
      r.detail += "; trained on " + std::to_string(diagnostic_history) + " earlier hours: optimized " +
                  detail::fmt(oos.mean_optimized) + ", fixed " + detail::fmt(oos.mean_fixed) + ", even " +
                  detail::fmt(oos.mean_even);
    }
    return r;
  });
}

struct DistributionOptions {
  std::size_t lambdas = 200;
  std::size_t samples = 1000000;
  std::uint64_t seed = 0;
};

// Truncated exponential mean against adaptive Gauss-Kronrod quadrature,
// fit_lambda round trips, and joint sampler moments.
inline SuiteResult verify_distributions(const DistributionOptions& o) {
  return detail::timed([&] {
    SuiteResult r{"distributions", 0, 0.0, 1e-9, false, {}, 0.0};
    using boost::math::quadrature::gauss_kronrod;
    double worst_quad = 0.0;
    double worst_fit = 0.0;
    for (std::size_t i = 0; i < o.lambdas; ++i) {
      const double l = 1e-4 * std::pow(50.0 / 1e-4, static_cast<double>(i) / static_cast<double>(o.lambdas - 1));
      const double norm = -std::expm1(-l);
      auto density = [&](double x) { return l * std::exp(-l * x) / norm; };
      double err = 0.0;
      const double mean = gauss_kronrod<double, 61>::integrate([&](double x) { return x * density(x); }, 0.0, 1.0, 15,
                                                               1e-14, &err);
      const double mass = gauss_kronrod<double, 61>::integrate(density, 0.0, 1.0, 15, 1e-14, &err);
      worst_quad = std::max({worst_quad, std::abs(truncexp_mean({l}) - mean), std::abs(mass - 1.0)});
      r.cases += 1;
    }
    // Round trips in mean space: the lambda grid's means plus random targets.
    Rng targets = make_rng(o.seed, 0xf17);
    for (std::size_t i = 0; i < 2 * o.lambdas; ++i) {
      const double target = i < o.lambdas
                                ? truncexp_mean({1e-4 * std::pow(50.0 / 1e-4, static_cast<double>(i) /
                                                                                static_cast<double>(o.lambdas - 1))})
                                : 0.01 + 0.48 * uniform01(targets);
      worst_fit = std::max(worst_fit, std::abs(truncexp_mean(fit_lambda(target)) - target));
      r.cases += 1;
    }
    double worst_z = 0.0;
    for (double theta : {0.3, 0.5, 0.7}) {
      const RegJointModel model{theta, fit_lambda(0.18), fit_lambda(0.27)};
      Rng rng = make_rng(o.seed, static_cast<std::uint64_t>(theta * 1000));
      detail::Welford up, dn, down_share;
      for (std::size_t s = 0; s < o.samples; ++s) {
        const auto [eu, ed] = sample_joint(model, rng);
        up.add(eu);
        dn.add(ed);
        down_share.add(ed > 0.0 || eu == 0.0 ? 1.0 : 0.0);
      }
      const double eu = (1.0 - theta) * truncexp_mean(model.up);
      const double ed = theta * truncexp_mean(model.down);
      worst_z = std::max({worst_z, std::abs(up.mean - eu) / up.std_error(), std::abs(dn.mean - ed) / dn.std_error(),
                          std::abs(down_share.mean - theta) / down_share.std_error()});
      r.cases += 3;
    }
    r.max_error = std::max(worst_quad, worst_fit);
    r.passed = worst_quad <= 1e-9 && worst_fit <= 1e-9 && worst_z <= 3.0;
    r.detail = "quadrature error " + detail::fmt(worst_quad) + ", round trip " + detail::fmt(worst_fit) +
               ", sampler max |z| " + detail::fmt(worst_z);
    return r;
  });
}

}  // namespace minerflex
