#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsmpc/numdiff.hpp"
#include "vsmpc/timewarp.hpp"

namespace vsmpc {

struct ModelJacobian {
  Mat dx;  // n x n
  Mat du;  // n x m
  Vec dt;  // n
};

/**
 * Continuous-time dynamics x' = f(x, u, t). The absolute time argument lets
 * exogenous signals (forecasts) be closed over inside rhs.
 *
 * jacobian is optional; model_jacobian() falls back to central differences
 * when it is empty.
 */
struct DynamicsModel {
  int state_dim = 1;
  int input_dim = 1;
  std::function<Vec(const Vec& x, const Vec& u, double t)> rhs;
  std::function<ModelJacobian(const Vec& x, const Vec& u, double t)> jacobian;
};

class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(int step, const std::string& what)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

ModelJacobian model_jacobian(const DynamicsModel& model, const Vec& x, const Vec& u, double t);

/// x + delta * f(x, u, t). Throws IntegrationError (step -1) when f is not finite.
Vec euler_step(const DynamicsModel& model, const Vec& x, const Vec& u, double t, double delta);

/// Chained Euler steps over grid; the j-th step is evaluated at t0 + cumulative[j].
/// Returns grid.size() + 1 states, the first being x0.
std::vector<Vec> rollout(const DynamicsModel& model, const Vec& x0, const std::vector<Vec>& controls,
                         const HorizonGrid& grid, double t0);

}  // namespace vsmpc
