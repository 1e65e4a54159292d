#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "minerflex/regulation.hpp"
#include "oracles.hpp"

using namespace minerflex;
using boost::math::quadrature::gauss_kronrod;

namespace {

double quad(const std::function<double(double)>& f) {
  double err = 0;
  return gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 15, 1e-13, &err);
}

RegInstance reference_instance(double theta, double p_up = 30, double p_dn = 60) {
  RegInstance inst;
  inst.fleet = canonicalize({{"s9", 150, 130, 94}, {"s19", 100, 110, 150}});
  inst.p_up = p_up;
  inst.p_dn = p_dn;
  inst.model = {theta, fit_lambda(0.18), fit_lambda(0.27)};
  return inst;
}

// Monte Carlo through the generic path: joint draw, direction transform,
// realized cost with greedy allocation.
oracle_test::RunningStats mc_cost(const RegInstance& inst, double cu, double cd, std::size_t n,
                                  std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const std::vector<Direction> dirs{Direction::up, Direction::down};
  const std::vector<double> prices{inst.p_up, inst.p_dn};
  const Profile c({cu, cd});
  oracle_test::RunningStats st;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [eu, ed] = sample_joint(inst.model, rng);
    st.add(realized_cost(inst.fleet, prices, c, effective_epsilon({{eu, ed}}, dirs)));
  }
  return st;
}

}  // namespace

TEST(TruncExp, Pdf) {
  EXPECT_EQ(truncexp_pdf({1.0}, -0.1), 0.0);
  EXPECT_EQ(truncexp_pdf({1.0}, 1.1), 0.0);
  EXPECT_NEAR(truncexp_pdf({1.0}, 0.0), 1.0 / (1.0 - std::exp(-1.0)), 1e-14);
  EXPECT_NEAR(truncexp_pdf({1.0}, 0.0), 1.58198, 1e-5);
  for (double l : {1e-6, 5e-5, 1e-4, 0.3, 1.0, 7.0, 50.0}) {
    EXPECT_NEAR(quad([&](double x) { return truncexp_pdf({l}, x); }), 1.0, 1e-8) << l;
  }
  // Series branch agrees with the closed form near the switch.
  const double l = 0.99e-4;
  for (double x : {0.0, 0.3, 1.0}) {
    EXPECT_NEAR(truncexp_pdf({l}, x), l * std::exp(-l * x) / (1 - std::exp(-l)), 1e-10);
  }
  EXPECT_THROW(truncexp_pdf({0.0}, 0.5), InvalidInput);
}

TEST(TruncExp, Mean) {
  EXPECT_NEAR(truncexp_mean({1e-9}), 0.5, 1e-9);
  const double q1 = quad([](double x) { return x * truncexp_pdf({1.0}, x); });
  EXPECT_NEAR(truncexp_mean({1.0}), q1, 1e-10);
  EXPECT_NEAR(truncexp_mean({1.0}), 0.41802, 1e-5);
  EXPECT_NEAR(truncexp_mean({50.0}), 1.0 / 50.0, 1e-3 / 50.0);
  for (double l : {1e-4, 2e-4, 0.01, 0.5, 3.0, 20.0, 50.0}) {
    EXPECT_NEAR(truncexp_mean({l}), quad([&](double x) { return x * truncexp_pdf({l}, x); }), 1e-9) << l;
  }
}

TEST(TruncExp, FitLambda) {
  for (double m : {0.18, 0.27}) EXPECT_NEAR(truncexp_mean(fit_lambda(m)), m, 1e-10);
  oracle_test::Gen g(51);
  for (int i = 0; i < 500; ++i) {
    const double m = g.uniform(0.02, 0.4999);
    EXPECT_NEAR(truncexp_mean(fit_lambda(m)), m, 1e-9);
  }
  EXPECT_THROW(fit_lambda(0.5), InvalidInput);
  EXPECT_THROW(fit_lambda(0.7), InvalidInput);
  EXPECT_THROW(fit_lambda(0.0), InvalidInput);
}

TEST(TruncExp, SampleJoint) {
  Rng rng = make_rng(1);
  RegJointModel m{1.0, fit_lambda(0.18), fit_lambda(0.27)};
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_joint(m, rng).first, 0.0);
  m.theta = 0.0;
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(sample_joint(m, rng).second, 0.0);
  m.theta = 0.4;
  oracle_test::RunningStats up, dn;
  for (int i = 0; i < 200000; ++i) {
    const auto [u, d] = sample_joint(m, rng);
    EXPECT_TRUE(u == 0.0 || d == 0.0);
    EXPECT_TRUE(u >= 0.0 && u <= 1.0 && d >= 0.0 && d <= 1.0);
    up.add(u);
    dn.add(d);
  }
  EXPECT_NEAR(up.mean, 0.6 * 0.18, 3 * up.std_error());
  EXPECT_NEAR(dn.mean, 0.4 * 0.27, 3 * dn.std_error());
}

TEST(RegCost, Examples) {
  const RegInstance inst = reference_instance(0.5);
  EXPECT_DOUBLE_EQ(expected_reg_cost(inst, 0, 0), 0.0);
  RegInstance t0 = reference_instance(0.0);
  const double m1 = truncexp_mean(t0.model.up);
  EXPECT_NEAR(expected_reg_cost(t0, 40, 60), 40 * (94 * m1 - 30) + 60 * (94 - 60), 1e-9);
  EXPECT_THROW(expected_reg_cost(inst, 200, 100), InvalidInput);
  EXPECT_THROW(expected_reg_cost(inst, -1, 0), InvalidInput);
  RegInstance bad = inst;
  bad.fleet = canonicalize({{"x", 10, 1, 1}});
  EXPECT_THROW(expected_reg_cost(bad, 1, 1), InvalidInput);
}

TEST(RegCost, CasesSelected) {
  const RegParams q = reg_params(reference_instance(0.5));
  EXPECT_EQ(expected_reg_cost_detail(q, 50, 50).up_case, 1);
  EXPECT_EQ(expected_reg_cost_detail(q, 100, 100).up_case, 2);
  EXPECT_EQ(expected_reg_cost_detail(q, 50, 160).up_case, 3);
  EXPECT_EQ(expected_reg_cost_detail(q, 50, 150).up_case, 3);
  EXPECT_EQ(expected_reg_cost_detail(q, 50, 150).down_case, 1);
  EXPECT_EQ(expected_reg_cost_detail(q, 50, 160).down_case, 2);
}

TEST(RegCost, MatchesMonteCarlo) {
  for (double theta : {0.3, 0.7}) {
    const RegInstance inst = reference_instance(theta);
    for (double cu : {0.0, 60.0, 120.0}) {
      for (double cd : {0.0, 100.0, 170.0}) {
        if (cu + cd > 250) continue;
        const auto st = mc_cost(inst, cu, cd, 100000, 7);
        const double closed = expected_reg_cost(inst, cu, cd);
        EXPECT_NEAR(closed, st.mean, 3 * st.std_error() + 1e-9) << theta << " " << cu << " " << cd;
      }
    }
  }
}

TEST(RegCost, BranchContinuity) {
  oracle_test::Gen g(52);
  for (int i = 0; i < 200; ++i) {
    const RegParams q = reg_params(reference_instance(g.uniform(0, 1), g.uniform(0, 80), g.uniform(0, 80)));
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
    // c_dn = cap1: dn1 == dn2 and up2 == up3.
    const double cu = g.uniform(0.0, 100.0);
    const auto b1 = reg_branch_costs(q, cu, q.cap1);
    EXPECT_LE(rel(b1.dn1, b1.dn2), 1e-7);
    if (cu > 0) {
      EXPECT_LE(rel(b1.up2, b1.up3), 1e-7);
    }
    // c_up + c_dn = cap1: up1 == up2.
    const double cd = g.uniform(0.0, q.cap1 - 1.0);
    const auto b2 = reg_branch_costs(q, q.cap1 - cd, cd);
    EXPECT_LE(rel(b2.up1, b2.up2), 1e-7);
  }
}

TEST(RegCost, ConvexAlongSegments) {
  oracle_test::Gen g(53);
  for (int i = 0; i < 2000; ++i) {
    const RegInstance inst = reference_instance(g.uniform(0, 1), g.uniform(0, 80), g.uniform(0, 80));
    const Profile a = g.feasible(2, 250), b = g.feasible(2, 250);
    const double fa = expected_reg_cost(inst, a[0], a[1]);
    const double fb = expected_reg_cost(inst, b[0], b[1]);
    const double fm = expected_reg_cost(inst, 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]));
    EXPECT_LE(fm, 0.5 * (fa + fb) + 1e-9 * std::max(1.0, std::abs(fa) + std::abs(fb)));
  }
}

TEST(RegCost, EqualRewardsCollapse) {
  RegParams q = reg_params(reference_instance(0.4));
  q.r2 = q.r1;
  for (double cu : {10.0, 80.0}) {
    for (double cd : {40.0, 160.0}) {
      const auto b = reg_branch_costs(q, cu, cd);
      EXPECT_DOUBLE_EQ(b.dn2, b.dn1);
      EXPECT_DOUBLE_EQ(b.up2, b.up1);
      EXPECT_DOUBLE_EQ(b.up3, b.up1);
    }
  }
}

TEST(RegSolve, Trivial) {
  const Profile zero = solve_reg_profile(reference_instance(0.5, 0, 0));
  EXPECT_EQ(zero, Profile({0.0, 0.0}));
  const Profile up = solve_reg_profile(reference_instance(0.5, 400, 0));
  EXPECT_NEAR(up[0], 250, 1e-6);
  EXPECT_NEAR(up[1], 0, 1e-6);
}

TEST(RegSolve, MatchesDenseGrid) {
  for (double theta : {0.3, 0.5, 0.7}) {
    for (auto [pu, pd] : {std::pair{30.0, 60.0}, {20.0, 80.0}, {45.0, 70.0}}) {
      const RegInstance inst = reference_instance(theta, pu, pd);
      const Profile c = solve_reg_profile(inst);
      double best = 1e300;
      const double h = 250.0 / 199;
      for (int i = 0; i < 200; ++i) {
        for (int j = 0; i + j < 200; ++j) best = std::min(best, expected_reg_cost(inst, i * h, j * h));
      }
      const double v = expected_reg_cost(inst, c[0], c[1]);
      EXPECT_LE(v, best + 1e-6 * 250 * 150);
      EXPECT_TRUE(is_feasible(c, 250, 1e-12));
    }
  }
}
