#pragma once

#include <array>
#include <optional>
#include <vector>

#include "vsmpc/nlp.hpp"
#include "vsmpc/ocp.hpp"
#include "vsmpc/timewarp.hpp"

namespace vsmpc {

/// Piecewise-constant input over [breakpoints.front(), end).
struct ControlSchedule {
  std::vector<double> breakpoints;  // strictly increasing, first = t_k
  std::vector<Vec> values;          // one per segment
  double end = 0.0;                 // t_k + dt_mpc

  /// Zero-order-hold value at t. Times before the first breakpoint map to
  /// the first segment and times at or past `end` to the last.
  const Vec& value_at(double t) const;
};

struct ControllerState {
  Vec prev_applied_u;              // feeds the ramp term of the next solve
  std::optional<Vec> warm_start;   // shifted decision vector
  std::optional<HorizonGrid> last_grid;
};

struct StepOutcome {
  ControlSchedule schedule;
  ControllerState state;
  SolveResult solve;
  std::array<double, 2> beta{};   // warp coefficients used for the schedule
  double predicted_violation = 0.0;
  bool degraded = false;          // solve did not converge; best iterate used
};

/// Solves the joint control-and-warp problem at (t_k, x_k) and holds
/// u*_j on [t_k + w(j), t_k + w(j+1)) up to t_k + dt_mpc.
StepOutcome vsmpc_step(const OcpSpec& spec, const ControllerState& state, double t_k, const Vec& x_k,
                       double dt_mpc, const SolveOptions& opts = {});

/// Same problem with the warp frozen at (T/N, 0).
StepOutcome uniform_mpc_step(const OcpSpec& spec, const ControllerState& state, double t_k,
                             const Vec& x_k, double dt_mpc, const SolveOptions& opts = {});

/// u = 2 x w_f(t_k), clipped to [0, nameplate], held for the whole period.
ControlSchedule heuristic_step(double t_k, double x_k, double forecast_now, double nameplate,
                               double dt_mpc);

/// Schedule for an optimized input sequence over the given grid.
ControlSchedule interpolate_schedule(const std::vector<Vec>& inputs, const HorizonGrid& grid,
                                     double t_k, double dt_mpc);

}  // namespace vsmpc
