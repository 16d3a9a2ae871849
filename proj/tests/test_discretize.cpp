#include <gtest/gtest.h>

#include <cmath>

#include "vsmpc/bess.hpp"
#include "vsmpc/discretize.hpp"
#include "vsmpc/numdiff.hpp"

using namespace vsmpc;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

// Battery with constant 150 MW of wind and a 400 MWh store.
DynamicsModel battery(double wind = 150.0) {
  DynamicsModel m;
  m.rhs = [wind](const Vec&, const Vec& u, double) { return v1((wind - u[0]) / 400.0); };
  return m;
}

}  // namespace

TEST(Euler, BatteryStep) {
  EXPECT_NEAR(euler_step(battery(), v1(0.4), v1(100.0), 0.0, 0.1)[0], 0.4125, 1e-15);
}

TEST(Euler, EquilibriumAndDecay) {
  EXPECT_EQ(euler_step(battery(100.0), v1(0.4), v1(100.0), 0.0, 0.3)[0], 0.4);

  DynamicsModel decay;
  decay.rhs = [](const Vec& x, const Vec&, double) { return Vec(-x); };
  EXPECT_DOUBLE_EQ(euler_step(decay, v1(1.0), v1(0.0), 0.0, 0.5)[0], 0.5);
  EXPECT_DOUBLE_EQ(euler_step(decay, v1(1.0), v1(0.0), 7.0, 0.5)[0], 0.5);
}

TEST(Euler, Errors) {
  EXPECT_THROW(euler_step(battery(), v1(0.4), v1(100.0), 0.0, 0.0), IntegrationError);
  DynamicsModel bad;
  bad.rhs = [](const Vec&, const Vec&, double) { return v1(std::nan("")); };
  EXPECT_THROW(euler_step(bad, v1(0.4), v1(0.0), 0.0, 0.1), IntegrationError);

  const std::vector<Vec> us(3, v1(0.0));
  try {
    DynamicsModel late;
    late.rhs = [](const Vec&, const Vec&, double t) { return v1(t > 0.15 ? INFINITY : 0.0); };
    rollout(late, v1(0.0), us, uniform_grid(0.1, 3), 0.0);
    FAIL() << "expected integration error";
  } catch (const IntegrationError& e) {
    EXPECT_EQ(e.step(), 2);
  }
}

TEST(Rollout, HandSteps) {
  const auto xs = rollout(battery(), v1(0.4), {v1(100.0), v1(100.0)}, uniform_grid(0.1, 2), 0.0);
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_EQ(xs[0][0], 0.4);
  EXPECT_NEAR(xs[1][0], 0.4125, 1e-15);
  EXPECT_NEAR(xs[2][0], 0.425, 1e-15);

  const auto flat = rollout(battery(150.0), v1(0.4), {v1(150.0), v1(150.0)}, uniform_grid(0.1, 2), 0.0);
  EXPECT_EQ(flat[1][0], 0.4);
  EXPECT_EQ(flat[2][0], 0.4);
}

TEST(Rollout, WarpWithZeroCurvatureIsBitwiseUniform) {
  DynamicsModel m;
  m.rhs = [](const Vec& x, const Vec& u, double t) { return v1(std::sin(3.0 * t) - 0.7 * x[0] + u[0]); };
  std::vector<Vec> us;
  for (int j = 0; j < 10; ++j) us.push_back(v1(0.1 * j - 0.3));
  const auto a = rollout(m, v1(0.2), us, warp_grid(0.1, 0.0, 10), 1.5);
  const auto b = rollout(m, v1(0.2), us, uniform_grid(0.1, 10), 1.5);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j][0], b[j][0]);
}

TEST(FiniteDiff, Gradients) {
  const Vec z = (Vec(2) << 1.0, 2.0).finished();
  const Vec zero = finite_diff_gradient([](const Vec&) { return 3.0; }, z);
  EXPECT_EQ(zero.norm(), 0.0);
  const Vec g = finite_diff_gradient([](const Vec& v) { return v.dot(v); }, z);
  EXPECT_NEAR(g[0], 2.0, 1e-6);
  EXPECT_NEAR(g[1], 4.0, 1e-6);
}

TEST(FiniteDiff, NonFiniteNamesCoordinate) {
  const Vec z = (Vec(2) << 1.0, 0.0).finished();
  try {
    finite_diff_gradient([](const Vec& v) { return v[1] > 0.0 ? std::nan("") : v[0]; }, z);
    FAIL() << "expected non-finite evaluation";
  } catch (const NonFiniteEvaluation& e) {
    EXPECT_EQ(e.coordinate(), 1);
  }
}

TEST(FiniteDiff, JacobianMatchesModel) {
  DynamicsModel m;
  m.rhs = [](const Vec& x, const Vec& u, double) { return v1(x[0] * x[0] * u[0]); };
  const ModelJacobian j = model_jacobian(m, v1(0.5), v1(2.0), 0.0);
  EXPECT_NEAR(j.dx(0, 0), 2.0, 1e-7);
  EXPECT_NEAR(j.du(0, 0), 0.25, 1e-7);
  EXPECT_NEAR(j.dt[0], 0.0, 1e-7);
}
