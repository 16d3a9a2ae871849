#include <gtest/gtest.h>

#include <random>

#include "vsmpc/numdiff.hpp"
#include "vsmpc/timewarp.hpp"

using namespace vsmpc;

TEST(Warp, Evaluation) {
  EXPECT_DOUBLE_EQ(warp_eval({0.1, 0.0}, 0.0), 0.0);
  EXPECT_NEAR(warp_eval({0.1, 0.0}, 5.0), 0.5, 1e-15);
  EXPECT_NEAR(warp_eval({0.1, 0.03}, 3.0), 0.57, 1e-15);
}

TEST(Warp, IntervalsGrowLinearly) {
  WarpParams p{0.1, 0.03, 3, 1.0, 0.1, 4.0};
  const HorizonGrid g = warp_intervals(p);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_NEAR(g.deltas[0], 0.13, 1e-15);
  EXPECT_NEAR(g.deltas[1], 0.19, 1e-15);
  EXPECT_NEAR(g.deltas[2], 0.25, 1e-15);
  EXPECT_NEAR(g.total(), 0.57, 1e-15);
}

TEST(Warp, UniformIsDegenerateCase) {
  const HorizonGrid g = warp_intervals({0.1, 0.0, 10});
  for (double d : g.deltas) EXPECT_DOUBLE_EQ(d, 0.1);
  EXPECT_NEAR(g.cumulative[10], 1.0, 1e-15);

  const HorizonGrid u = uniform_grid(0.1, 10);
  EXPECT_EQ(u.deltas, g.deltas);
  EXPECT_EQ(u.cumulative, g.cumulative);
}

TEST(Warp, RejectsBandViolation) {
  try {
    warp_intervals({0.5, 0.0, 10});
    FAIL() << "expected a band violation";
  } catch (const ConstraintViolation& e) {
    EXPECT_EQ(e.bound(), "w(N) <= alpha_hi*T");
  }
  EXPECT_THROW(warp_intervals({kBetaFloor, 0.0, 10}), ConstraintViolation);
  EXPECT_THROW(warp_intervals({0.2, -0.001, 10}), ConstraintViolation);
}

TEST(Warp, Residuals) {
  auto r = warp_feasibility_residuals({0.1, 0.0, 10});
  EXPECT_NEAR(r[0], 0.0, 1e-15);
  EXPECT_NEAR(r[1], -3.0, 1e-15);
  EXPECT_NEAR(r[2], kBetaFloor - 0.1, 1e-15);
  EXPECT_EQ(r[3], 0.0);

  r = warp_feasibility_residuals({0.05, 0.035, 10});
  EXPECT_NEAR(r[1], 0.0, 1e-14);
  EXPECT_NO_THROW(warp_intervals({0.05, 0.035, 10}));

  r = warp_feasibility_residuals({kBetaFloor, 0.0, 10});
  EXPECT_NEAR(r[0], 1.0 - 10 * kBetaFloor, 1e-15);
  EXPECT_GT(r[0], 0.0);
}

TEST(Warp, EndpointGradientMatchesFiniteDifference) {
  const auto end = [](const Vec& b) { return warp_eval({b[0], b[1], 10}, 10.0); };
  const Vec g = finite_diff_gradient(end, (Vec(2) << 0.1, 0.03).finished());
  EXPECT_NEAR(g[0], 10.0, 1e-6);
  EXPECT_NEAR(g[1], 100.0, 1e-6);
}

TEST(Warp, RandomFeasibleParameters) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> b1(kBetaFloor, 0.4), b2(0.0, 0.04);
  int checked = 0;
  while (checked < 200) {
    const WarpParams p{b1(rng), b2(rng), 10};
    const auto r = warp_feasibility_residuals(p);
    if (r[0] > 0.0 || r[1] > 0.0) continue;
    const HorizonGrid g = warp_intervals(p);
    for (std::size_t j = 0; j < g.size(); ++j) {
      EXPECT_GE(g.deltas[j], kBetaFloor);
      if (j > 0) EXPECT_NEAR(g.deltas[j] - g.deltas[j - 1], 2.0 * p.beta2, 1e-12);
    }
    EXPECT_GE(g.total(), 1.0 - 1e-12);
    EXPECT_LE(g.total(), 4.0 + 1e-12);
    ++checked;
  }
}
