#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/error.hpp"
#include "minerflex/random.hpp"
#include "minerflex/regulation.hpp"
#include "minerflex/single_machine.hpp"

namespace minerflex {

struct ConstantRate {
  double value = 0.0;
};
struct BernoulliRate {
  double probability = 0.0;  // all-or-nothing deployment
};
struct UniformRate {
  double lo = 0.0;
  double hi = 1.0;
};
using DeploymentModel = std::variant<ConstantRate, TruncatedExponential, BernoulliRate, UniformRate>;

inline double model_mean(const DeploymentModel& m) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantRate>) return d.value;
        if constexpr (std::is_same_v<T, TruncatedExponential>) return truncexp_mean(d);
        if constexpr (std::is_same_v<T, BernoulliRate>) return d.probability;
        if constexpr (std::is_same_v<T, UniformRate>) return 0.5 * (d.lo + d.hi);
      },
      m);
}

inline double model_variance(const DeploymentModel& m) {
  return std::visit(
      [](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantRate>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, TruncatedExponential>) {
          // E[X^2] = 2/l^2 - (l + 2)/(l (e^l - 1)) on [0, 1].
          const double l = d.lambda;
          const double mean = truncexp_mean(d);
          const double second = l < 1e-4 ? 1.0 / 3.0 - l / 12.0
                                         : 2.0 / (l * l) - (l + 2.0) / (l * std::expm1(l));
          return std::max(0.0, second - mean * mean);
        } else if constexpr (std::is_same_v<T, BernoulliRate>) {
          return d.probability * (1.0 - d.probability);
        } else {
          return (d.hi - d.lo) * (d.hi - d.lo) / 12.0;
        }
      },
      m);
}

inline double draw(const DeploymentModel& m, Rng& rng) {
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ConstantRate>) return d.value;
        if constexpr (std::is_same_v<T, TruncatedExponential>) return sample_truncexp(d, rng);
        if constexpr (std::is_same_v<T, BernoulliRate>) return uniform01(rng) < d.probability ? 1.0 : 0.0;
        if constexpr (std::is_same_v<T, UniformRate>) return d.lo + (d.hi - d.lo) * uniform01(rng);
      },
      m);
}

// An ancillary-service program: price, direction and deployment-rate model.
struct ProgramSpec {
  std::string id;
  double price = 0.0;
  Direction direction = Direction::up;
  DeploymentModel model = ConstantRate{};
};

// A reg-up/reg-down pair whose deployments are mutually exclusive.
struct RegulationPairing {
  std::size_t up = 0;
  std::size_t down = 1;
  double theta = 0.5;
};

struct ProgramSet {
  std::vector<ProgramSpec> programs;
  std::optional<RegulationPairing> regulation;

  std::size_t size() const noexcept { return programs.size(); }

  std::vector<double> prices() const {
    std::vector<double> out;
    for (const auto& p : programs) out.push_back(p.price);
    return out;
  }
  std::vector<Direction> directions() const {
    std::vector<Direction> out;
    for (const auto& p : programs) out.push_back(p.direction);
    return out;
  }
  // Moments of the raw deployment rate; the pairing only changes the joint law.
  std::vector<ProgramStats> stats() const {
    std::vector<ProgramStats> out;
    for (std::size_t i = 0; i < programs.size(); ++i) {
      double mean = model_mean(programs[i].model);
      double var = model_variance(programs[i].model);
      if (regulation && (i == regulation->up || i == regulation->down)) {
        // Deployed with probability w, zero otherwise.
        const double w = i == regulation->down ? regulation->theta : 1.0 - regulation->theta;
        const double second = var + mean * mean;
        mean *= w;
        var = std::max(0.0, w * second - mean * mean);
      }
      out.push_back({programs[i].price, mean, var});
    }
    return out;
  }
  // Moments of the rate actually shed: a down program sheds 1 - eps.
  std::vector<ProgramStats> effective_stats() const {
    std::vector<ProgramStats> out = stats();
    for (std::size_t i = 0; i < programs.size(); ++i) {
      if (programs[i].direction == Direction::down) out[i].mean_eps = 1.0 - out[i].mean_eps;
    }
    return out;
  }
};

inline void validate(const ProgramSet& set) {
  if (set.programs.empty()) throw InvalidInput("no programs configured");
  for (const auto& p : set.programs) {
    if (!(p.price >= 0.0) || !std::isfinite(p.price)) {
      throw InvalidInput("program '" + p.id + "' needs a finite nonnegative price");
    }
  }
  if (set.regulation) {
    const auto& r = *set.regulation;
    if (r.up >= set.size() || r.down >= set.size() || r.up == r.down) {
      throw InvalidInput("regulation pairing refers to unknown programs");
    }
    if (!(r.theta >= 0.0 && r.theta <= 1.0)) throw InvalidInput("theta must lie in [0, 1]");
    if (!std::holds_alternative<TruncatedExponential>(set.programs[r.up].model) ||
        !std::holds_alternative<TruncatedExponential>(set.programs[r.down].model)) {
      throw InvalidInput("paired regulation programs need truncated exponential deployment");
    }
  }
}

// Draws raw deployment rates for every program (regulation pairs jointly).
inline DeploymentSample draw_raw(const ProgramSet& set, Rng& rng) {
  DeploymentSample s;
  s.epsilon.resize(set.size());
  std::size_t skip_a = set.size();
  std::size_t skip_b = set.size();
  if (set.regulation) {
    const auto& r = *set.regulation;
    const RegJointModel joint{r.theta, std::get<TruncatedExponential>(set.programs[r.up].model),
                              std::get<TruncatedExponential>(set.programs[r.down].model)};
    const auto [up, dn] = sample_joint(joint, rng);
    s.epsilon[r.up] = up;
    s.epsilon[r.down] = dn;
    skip_a = r.up;
    skip_b = r.down;
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (i != skip_a && i != skip_b) s.epsilon[i] = draw(set.programs[i].model, rng);
  }
  return s;
}

// Sampler for the offline solver: raw draw followed by the direction
// transform.
class ProgramSampler {
 public:
  explicit ProgramSampler(ProgramSet set) : set_(std::move(set)), directions_(set_.directions()) {
    validate(set_);
  }

  DeploymentSample operator()(Rng& rng) const {
    return effective_epsilon(draw_raw(set_, rng), directions_);
  }

  const ProgramSet& programs() const noexcept { return set_; }

 private:
  ProgramSet set_;
  std::vector<Direction> directions_;
};

}  // namespace minerflex
