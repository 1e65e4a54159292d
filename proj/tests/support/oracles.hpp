#pragma once

// Test-only references, deliberately naive. None of these call the solver
// code they are used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "minerflex/deployment.hpp"
#include "minerflex/fleet.hpp"

namespace oracle_test {

using minerflex::FleetSpec;
using minerflex::MachineType;
using minerflex::Profile;

struct Gen {
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t seed) : rng(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  // Random fleet; with some probability rewards repeat or are zero so the
  // canonical form has ties merged.
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

  std::vector<double> epsilon(std::size_t n) {
    std::vector<double> e(n);
    for (auto& v : e) {
      const double u = uniform(0.0, 1.0);
      v = u < 0.1 ? 0.0 : (u < 0.2 ? 1.0 : uniform(0.0, 1.0));
    }
    return e;
  }

  // Uniform-ish point of {c >= 0, sum c <= cap}, sometimes on the boundary.
  Profile feasible(std::size_t n, double cap) {
    std::vector<double> w(n + 1);
    double s = 0.0;
    for (auto& v : w) {
      v = -std::log(1.0 - uniform(0.0, 1.0));
      s += v;
    }
    Profile c(n);
    const bool face = coin(0.2);
    double fs = 0.0;
    for (std::size_t i = 0; i < n; ++i) fs += w[i];
    for (std::size_t i = 0; i < n; ++i) c[i] = face ? cap * w[i] / fs : cap * w[i] / s;
    if (coin(0.1)) c[index(0, n - 1)] = 0.0;
    return c;
  }
};

// Min of sum r_k d_k over a lattice of d with step h (plus the capacity
// endpoints), subject to sum d = total and 0 <= d_k <= cap_k. The last
// coordinate absorbs the remainder.
inline double lp_grid_min(const std::vector<double>& caps, const std::vector<double>& rewards,
                          double total, double h) {
  const std::size_t k = caps.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> d(k, 0.0);
  std::function<void(std::size_t, double, double)> rec = [&](std::size_t i, double left, double acc) {
    if (i + 1 == k) {
      if (left >= -1e-9 && left <= caps[i] + 1e-9) best = std::min(best, acc + rewards[i] * std::max(0.0, left));
      return;
    }
    std::vector<double> values;
    for (double v = 0.0; v <= caps[i] + 1e-12; v += h) values.push_back(v);
    values.push_back(caps[i]);
    values.push_back(std::min(caps[i], std::max(0.0, left)));
    for (double v : values) {
      if (v > left + 1e-9) continue;
      rec(i + 1, left - v, acc + rewards[i] * v);
    }
  };
  rec(0, total, 0.0);
  return best;
}

// Brute-force Euclidean projection onto {c >= 0, sum c <= cap} for N <= 2,
// by dense grid followed by local refinement.
inline std::vector<double> projection_grid(const std::vector<double>& x, double cap) {
  auto dist = [&](const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (c[i] - x[i]) * (c[i] - x[i]);
    return s;
  };
  std::vector<double> best(x.size(), 0.0);
  double best_d = dist(best);
  double lo0 = 0.0, hi0 = cap, lo1 = 0.0, hi1 = cap;
  for (int level = 0; level < 8; ++level) {
    const int n = 200;
    const double h0 = (hi0 - lo0) / n;
    const double h1 = x.size() > 1 ? (hi1 - lo1) / n : 0.0;
    for (int i = 0; i <= n; ++i) {
      const double a = lo0 + i * h0;
      const int jmax = x.size() > 1 ? n : 0;
      for (int j = 0; j <= jmax; ++j) {
        std::vector<double> c{a};
        if (x.size() > 1) c.push_back(lo1 + j * h1);
        double s = 0.0;
        for (double v : c) s += v;
        if (s > cap) continue;
        const double dd = dist(c);
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
    }
    lo0 = std::max(0.0, best[0] - 2 * h0);
    hi0 = std::min(cap, best[0] + 2 * h0);
    if (x.size() > 1) {
      lo1 = std::max(0.0, best[1] - 2 * h1);
      hi1 = std::min(cap, best[1] + 2 * h1);
    }
  }
  return best;
}

struct RunningStats {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double std_error() const { return std::sqrt(variance() / static_cast<double>(n)); }
};

}  // namespace oracle_test
