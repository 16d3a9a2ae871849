#include "vsmpc/controllers.hpp"

#include <algorithm>
#include <stdexcept>

namespace vsmpc {

namespace {
constexpr double kMinSegment = 1e-6;  // [h]
}  // namespace

const Vec& ControlSchedule::value_at(double t) const {
  if (values.empty()) throw std::logic_error("empty control schedule");
  auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), t);
  if (it == breakpoints.begin()) return values.front();
  return values[static_cast<std::size_t>(std::distance(breakpoints.begin(), it)) - 1];
}

ControlSchedule interpolate_schedule(const std::vector<Vec>& inputs, const HorizonGrid& grid,
                                     double t_k, double dt_mpc) {
  if (!(dt_mpc > 0.0)) throw std::invalid_argument("control period must be positive");
  ControlSchedule sched;
  sched.end = t_k + dt_mpc;
  for (std::size_t j = 0; j < inputs.size(); ++j) {
    // Segments shorter than kMinSegment at the end of the period are dropped.
    if (j > 0 && !(grid.cumulative[j] < dt_mpc - kMinSegment)) break;
    sched.breakpoints.push_back(t_k + grid.cumulative[j]);
    sched.values.push_back(inputs[j]);
  }
  return sched;
}

ControlSchedule heuristic_step(double t_k, double x_k, double forecast_now, double nameplate,
                               double dt_mpc) {
  ControlSchedule sched;
  sched.breakpoints = {t_k};
  sched.values = {Vec::Constant(1, std::clamp(2.0 * x_k * forecast_now, 0.0, nameplate))};
  sched.end = t_k + dt_mpc;
  return sched;
}

namespace {

Vec initial_guess(const OcpProblem& problem, double t_k) {
  const OcpSpec& spec = problem.spec();
  const int m = spec.model.input_dim;
  Vec z(problem.dim());
  std::array<double, 2> beta;
  if (spec.frozen_warp) {
    beta = *spec.frozen_warp;
  } else {
    const BetaBox box = resolved_beta_box(spec);
    beta = {std::clamp(spec.alpha_lo * spec.horizon / spec.steps, box.beta1_lower, box.beta1_upper),
            std::clamp(0.0, box.beta2_lower, box.beta2_upper)};
    z[m * spec.steps] = beta[0];
    z[m * spec.steps + 1] = beta[1];
  }
  const HorizonGrid grid = warp_grid(beta[0], beta[1], spec.steps);
  for (int j = 0; j < spec.steps; ++j) {
    const Vec u = spec.initial_input ? spec.initial_input(j, t_k + grid.cumulative[j])
                                     : Vec(0.5 * (spec.u_lower + spec.u_upper));
    z.segment(j * m, m) = u.cwiseMax(spec.u_lower).cwiseMin(spec.u_upper);
  }
  return z;
}

Vec shifted(const Vec& z, const OcpSpec& spec) {
  const int m = spec.model.input_dim;
  const int n_inputs = m * spec.steps;
  Vec out = z;
  if (spec.steps > 1) out.segment(0, n_inputs - m) = z.segment(m, n_inputs - m);
  return out;  // tail duplicated, warp coefficients carried over
}

StepOutcome mpc_step(OcpSpec spec, const ControllerState& state, double t_k, const Vec& x_k,
                     double dt_mpc, const SolveOptions& opts) {
  if (!(dt_mpc > 0.0)) throw std::invalid_argument("control period must be positive");
  if (state.prev_applied_u.size() > 0) spec.u_prev = state.prev_applied_u;
  const OcpProblem problem(std::move(spec), x_k, t_k);
  const NlpProblem nlp = problem.nlp();

  const bool warm = state.warm_start && state.warm_start->size() == problem.dim();
  StepOutcome out;
  out.solve = solve(nlp, warm ? *state.warm_start : initial_guess(problem, t_k), opts);
  if (warm && out.solve.status != SolveStatus::converged) {
    // A stale warm start can strand the solver (e.g. after noise pushed the
    // state out of the band); retry once from the cold guess.
    SolveResult cold = solve(nlp, initial_guess(problem, t_k), opts);
    if (cold.status == SolveStatus::converged) out.solve = std::move(cold);
  }
  out.degraded = out.solve.status != SolveStatus::converged;
  const Vec& z = out.solve.z_opt;
  out.beta = problem.beta(z);
  const OcpEvaluation ev = problem.evaluate(z, false);
  out.predicted_violation = std::max(0.0, ev.ineq.size() > 0 ? ev.ineq.maxCoeff() : 0.0);
  out.schedule = interpolate_schedule(problem.controls(z), ev.grid, t_k, dt_mpc);

  out.state.prev_applied_u = out.schedule.values.back();
  out.state.warm_start = shifted(z, problem.spec());
  out.state.last_grid = ev.grid;
  return out;
}

}  // namespace

StepOutcome vsmpc_step(const OcpSpec& spec, const ControllerState& state, double t_k, const Vec& x_k,
                       double dt_mpc, const SolveOptions& opts) {
  OcpSpec free_spec = spec;
  free_spec.frozen_warp.reset();
  return mpc_step(std::move(free_spec), state, t_k, x_k, dt_mpc, opts);
}

StepOutcome uniform_mpc_step(const OcpSpec& spec, const ControllerState& state, double t_k,
                             const Vec& x_k, double dt_mpc, const SolveOptions& opts) {
  OcpSpec frozen = spec;
  frozen.frozen_warp = std::array<double, 2>{spec.horizon / spec.steps, 0.0};
  return mpc_step(std::move(frozen), state, t_k, x_k, dt_mpc, opts);
}

}  // namespace vsmpc
