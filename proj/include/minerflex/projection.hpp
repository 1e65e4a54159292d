#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "minerflex/deployment.hpp"

namespace minerflex {

// Euclidean projection onto {c >= 0, sum(c) <= cap}. If clipping negatives
// already satisfies the budget that is the answer; otherwise the projection
// lies on the face sum(c) = cap and is found by the sort-and-threshold rule.
inline Profile project_feasible(std::span<const double> point, double cap) {
  Profile out(std::vector<double>(point.begin(), point.end()));
  double clipped_sum = 0.0;
  for (double& v : out.c) {
    if (!std::isfinite(v)) throw InvalidInput("cannot project a non-finite point");
    v = std::max(v, 0.0);
    clipped_sum += v;
  }
  if (clipped_sum <= cap) return out;

  std::vector<double> sorted(point.begin(), point.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double prefix = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    prefix += sorted[j];
    const double candidate = (prefix - cap) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) tau = candidate;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::max(point[i] - tau, 0.0);
    sum += out[i];
  }
  // Rounding can leave the sum an ulp or two above the cap; take the excess
  // off the largest component.
  for (int pass = 0; pass < 8 && sum > cap; ++pass) {
    auto it = std::max_element(out.c.begin(), out.c.end());
    *it = std::max(0.0, std::nextafter(*it - (sum - cap), 0.0));
    sum = 0.0;
    for (double v : out.c) sum += v;
  }
  return out;
}

inline Profile project_feasible(const Profile& point, double cap) {
  return project_feasible(std::span<const double>(point.c), cap);
}

}  // namespace minerflex
