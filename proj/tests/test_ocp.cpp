#include <gtest/gtest.h>

#include <random>

#include "vsmpc/bess.hpp"
#include "vsmpc/numdiff.hpp"
#include "vsmpc/ocp.hpp"

using namespace vsmpc;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

OcpSpec scalar_spec(int steps) {
  OcpSpec s;
  s.model.rhs = [](const Vec& x, const Vec& u, double) { return Vec(u - 0.5 * x); };
  s.steps = steps;
  s.horizon = 1.0;
  s.alpha_lo = 0.1;
  s.alpha_hi = 4.0;
  s.stage_cost.value = [](const StageArgs&) { return 2.5; };
  s.u_lower = v1(-1.0);
  s.u_upper = v1(1.0);
  s.u_prev = v1(0.0);
  return s;
}

Vec decision(std::initializer_list<double> us, double b1, double b2) {
  Vec z(static_cast<Eigen::Index>(us.size()) + 2);
  Eigen::Index i = 0;
  for (double u : us) z[i++] = u;
  z[i++] = b1;
  z[i] = b2;
  return z;
}

// Independent evaluation of the averaged battery objective: own Euler
// rollout, stage costs from the public surrogate, weighted by the intervals.
double battery_objective_oracle(const bess::BessParams& p, const Vec& z, double x0, double t0,
                                double u_applied) {
  const int n = p.steps;
  const double b1 = z[n], b2 = z[n + 1];
  double x = x0, sum = 0.0, u_prev = u_applied, t = t0;
  for (int j = 0; j < n; ++j) {
    const double d = b1 + b2 * (2 * j + 1);
    const double wf = bess::wind_forecast(t);
    sum += d * bess::predicted_stage_cost(x, z[j], u_prev, wf, p);
    x += d * (wf - z[j]) / p.capacity;
    u_prev = z[j];
    t += d;
  }
  return sum / (b1 * n + b2 * n * n);
}

Vec random_battery_point(std::mt19937_64& rng, const bess::BessParams& p) {
  std::uniform_real_distribution<double> u(0.0, p.nameplate), b1(0.1, 0.3), b2(0.0, 0.01);
  Vec z(p.steps + 2);
  for (int j = 0; j < p.steps; ++j) z[j] = u(rng);
  z[p.steps] = b1(rng);
  z[p.steps + 1] = b2(rng);
  return z;
}

}  // namespace

TEST(Ocp, Layout) {
  const OcpSpec s = scalar_spec(1);
  EXPECT_EQ(decision_dim(s), 3);
  const OcpProblem prob(s, v1(0.0), 0.0);
  const OcpEvaluation ev = prob.evaluate(decision({0.2}, 0.3, 0.1), false);
  ASSERT_EQ(ev.ineq.size(), 4);
  WarpParams wp{0.3, 0.1, 1, 1.0, 0.1, 4.0};
  const auto res = warp_feasibility_residuals(wp);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(ev.ineq[i], res[i]);
}

TEST(Ocp, BatteryLayout) {
  bess::BessParams p;
  OcpSpec s = bess::build_bess_ocp(p, {}, 100.0);
  EXPECT_EQ(decision_dim(s), 12);
  EXPECT_EQ(ineq_rows(s), 64);
  s.frozen_warp = std::array<double, 2>{0.1, 0.0};
  EXPECT_EQ(decision_dim(s), 10);
  EXPECT_EQ(ineq_rows(s), 60);
}

TEST(Ocp, AverageOfConstantCost) {
  const OcpSpec s = scalar_spec(4);
  for (auto [b1, b2] : {std::pair{0.1, 0.0}, {0.2, 0.05}, {0.05, 0.2}}) {
    EXPECT_NEAR(objective_average(s, decision({0.1, 0.2, 0.3, 0.4}, b1, b2), v1(1.0), 0.0), 2.5, 1e-14);
  }
}

TEST(Ocp, AverageWeightsFirstInterval) {
  OcpSpec s = scalar_spec(2);
  s.stage_cost.value = [](const StageArgs& a) { return a.step == 0 ? 1.0 : 0.0; };
  EXPECT_NEAR(objective_average(s, decision({0.0, 0.0}, 0.1, 0.03), v1(0.0), 0.0), 0.40625, 1e-14);
}

TEST(Ocp, GuardOnShortHorizon) {
  OcpSpec s = scalar_spec(2);
  s.alpha_lo = 1.0;
  EXPECT_THROW(objective_average(s, decision({0.0, 0.0}, 0.1, 0.0), v1(0.0), 0.0), GuardError);
  const OcpProblem prob(s, v1(0.0), 0.0);
  EXPECT_NO_THROW(prob.evaluate(decision({0.0, 0.0}, 0.1, 0.0), true));
}

TEST(Ocp, CallbackDimensionMismatch) {
  OcpSpec s = scalar_spec(2);
  s.path_ineq.push_back({2, [](const StageArgs&) { return Vec::Zero(3); }, nullptr});
  const OcpProblem prob(s, v1(0.0), 0.0);
  EXPECT_THROW(prob.evaluate(decision({0.0, 0.0}, 0.3, 0.0), false), AssemblyError);
}

TEST(Ocp, IdleBatteryPaysOnlyRamp) {
  bess::BessParams p;
  bess::Forecast calm;
  calm.value = [](double) { return 0.0; };
  calm.rate = [](double) { return 0.0; };
  const OcpSpec s = bess::build_bess_ocp(p, calm, 120.0);
  Vec z = Vec::Zero(12);
  z[10] = 0.1;
  const double f = objective_average(s, z, v1(0.5), 0.0);
  // No revenue; step 0 ramps down from 120 MW, the other steps sit at the
  // smoothing floor, and the reserve surrogate sees u - w_f - P = -200.
  const double ramp = p.prices.ramping * (std::sqrt(120.0 * 120.0 + 0.01) + 9 * 0.1);
  const double reserve = 10 * (p.prices.reserve_scheduling + p.prices.reserve_dispatch) *
                         (-200.0 + std::sqrt(200.0 * 200.0 + 0.01)) / 2.0;
  EXPECT_NEAR(f, 0.1 * (ramp + reserve), 1e-10);
  EXPECT_GT(f, 0.0);
}

TEST(Ocp, BatteryObjectiveMatchesIndependentEvaluator) {
  bess::BessParams p;
  const OcpSpec s = bess::build_bess_ocp(p, {}, 80.0);
  std::mt19937_64 rng(11);
  for (int k = 0; k < 10; ++k) {
    const Vec z = random_battery_point(rng, p);
    const double t0 = 0.3 * k;
    EXPECT_NEAR(objective_average(s, z, v1(0.55), t0), battery_objective_oracle(p, z, 0.55, t0, 80.0),
                1e-10);
  }
}

TEST(Ocp, AnalyticDerivativesMatchFiniteDifferences) {
  bess::BessParams p;
  p.capacity = 800.0;  // exercise the smoothed discharge limit
  const OcpProblem prob(bess::build_bess_ocp(p, {}, 150.0), v1(0.6), 2.0);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 5; ++k) {
    const Vec z = random_battery_point(rng, p);
    const OcpEvaluation ev = prob.evaluate(z, true);
    const Vec g = finite_diff_gradient([&](const Vec& v) { return prob.evaluate(v, false).objective; }, z);
    const Mat J = finite_diff_jacobian([&](const Vec& v) { return prob.evaluate(v, false).ineq; }, z);
    EXPECT_LE((ev.gradient - g).norm(), 1e-5 * std::max(1.0, g.norm()));
    EXPECT_LE((ev.jacobian - J).norm(), 1e-5 * std::max(1.0, J.norm()));
  }
}
