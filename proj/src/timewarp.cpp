#include "vsmpc/timewarp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace vsmpc {

namespace {

// Relative slack on the band check so that boundary-feasible coefficients
// are not rejected because of round-off in beta2 * N^2.
constexpr double kBandSlack = 1e-12;

}  // namespace

double warp_eval(const WarpParams& p, double tau) {
  return p.beta1 * tau + p.beta2 * tau * tau;
}

std::array<double, 4> warp_feasibility_residuals(const WarpParams& p) {
  const double end = warp_eval(p, static_cast<double>(p.steps));
  return {p.alpha_lo * p.horizon - end, end - p.alpha_hi * p.horizon,
          kBetaFloor - p.beta1, -p.beta2};
}

HorizonGrid warp_grid(double beta1, double beta2, int steps) {
  HorizonGrid grid;
  grid.deltas.resize(static_cast<std::size_t>(steps));
  grid.cumulative.resize(static_cast<std::size_t>(steps) + 1);
  grid.cumulative[0] = 0.0;
  for (int j = 0; j < steps; ++j) {
    const double tau = static_cast<double>(j);
    grid.deltas[j] = beta1 + beta2 * (2.0 * tau + 1.0);
    grid.cumulative[j + 1] = beta1 * (tau + 1.0) + beta2 * (tau + 1.0) * (tau + 1.0);
  }
  return grid;
}

HorizonGrid uniform_grid(double step, int steps) {
  return warp_grid(step, 0.0, steps);
}

HorizonGrid warp_intervals(const WarpParams& p) {
  if (p.steps < 1) {
    throw ConstraintViolation("steps", "warp needs at least one step");
  }
  if (!(p.horizon > 0.0) || !(p.alpha_lo > 0.0) || !(p.alpha_hi >= p.alpha_lo)) {
    throw ConstraintViolation("band", "warp band requires T > 0 and 0 < alpha_lo <= alpha_hi");
  }
  static const char* kNames[4] = {"alpha_lo*T <= w(N)", "w(N) <= alpha_hi*T",
                                  "beta1 >= beta_floor", "beta2 >= 0"};
  const auto res = warp_feasibility_residuals(p);
  const double scale = std::max(1.0, p.alpha_hi * p.horizon);
  for (int i = 0; i < 4; ++i) {
    const double slack = i < 2 ? kBandSlack * scale : 0.0;
    if (!(res[i] <= slack)) {
      std::ostringstream msg;
      msg << "warp violates " << kNames[i] << " (residual " << res[i] << ")";
      throw ConstraintViolation(kNames[i], msg.str());
    }
  }
  return warp_grid(p.beta1, p.beta2, p.steps);
}

}  // namespace vsmpc
