#include "vsmpc/discretize.hpp"

namespace vsmpc {

ModelJacobian model_jacobian(const DynamicsModel& model, const Vec& x, const Vec& u, double t) {
  if (model.jacobian) return model.jacobian(x, u, t);

  ModelJacobian jac;
  jac.dx = finite_diff_jacobian([&](const Vec& xs) { return model.rhs(xs, u, t); }, x);
  jac.du = finite_diff_jacobian([&](const Vec& us) { return model.rhs(x, us, t); }, u);
  Vec t_vec(1);
  t_vec << t;
  jac.dt = finite_diff_jacobian([&](const Vec& ts) { return model.rhs(x, u, ts[0]); }, t_vec).col(0);
  return jac;
}

Vec euler_step(const DynamicsModel& model, const Vec& x, const Vec& u, double t, double delta) {
  if (!(delta > 0.0)) {
    throw IntegrationError(-1, "euler step requires a positive interval");
  }
  const Vec dx = model.rhs(x, u, t);
  if (dx.size() != model.state_dim) {
    throw IntegrationError(-1, "dynamics returned " + std::to_string(dx.size()) +
                                   " entries, expected " + std::to_string(model.state_dim));
  }
  if (!dx.allFinite()) {
    throw IntegrationError(-1, "dynamics returned a non-finite derivative");
  }
  return x + delta * dx;
}

std::vector<Vec> rollout(const DynamicsModel& model, const Vec& x0, const std::vector<Vec>& controls,
                         const HorizonGrid& grid, double t0) {
  if (controls.size() != grid.size()) {
    throw IntegrationError(-1, "rollout needs one control per grid interval");
  }
  std::vector<Vec> states;
  states.reserve(grid.size() + 1);
  states.push_back(x0);
  for (std::size_t j = 0; j < grid.size(); ++j) {
    try {
      states.push_back(
          euler_step(model, states.back(), controls[j], t0 + grid.cumulative[j], grid.deltas[j]));
    } catch (const IntegrationError& e) {
      throw IntegrationError(static_cast<int>(j),
                             "step " + std::to_string(j) + ": " + e.what());
    }
  }
  return states;
}

}  // namespace vsmpc
