#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsmpc/discretize.hpp"
#include "vsmpc/nlp.hpp"
#include "vsmpc/timewarp.hpp"

namespace vsmpc {

/// Arguments handed to stage callbacks at prediction step j.
struct StageArgs {
  int step;
  const Vec& x;       // x_j
  const Vec& u;       // u_j
  const Vec& u_prev;  // u_{j-1}, or the applied input at j = 0
  double delta;       // interval length [h]
  double t;           // absolute prediction time t_now + w(j) [h]
};

struct StageGradient {
  Vec dx;
  Vec du;
  Vec du_prev;
  double ddelta = 0.0;
  double dt = 0.0;
};

struct StageCost {
  std::function<double(const StageArgs&)> value;
  std::function<StageGradient(const StageArgs&)> gradient;  // optional
};

struct PathJacobian {
  Mat dx;      // rows x n
  Mat du;      // rows x m
  Vec ddelta;  // rows
  Vec dt;      // rows
};

/// Rows g(x_j, u_j, delta_j, t_j) <= 0 imposed at every step j = 0..N-1.
struct PathConstraint {
  int rows = 0;
  std::function<Vec(const StageArgs&)> value;
  std::function<PathJacobian(const StageArgs&)> jacobian;  // optional
};

/// Rows g(x) <= 0 on a single predicted state.
struct StateConstraint {
  int rows = 0;
  std::function<Vec(const Vec& x)> value;
  std::function<Mat(const Vec& x)> jacobian;  // optional
};

struct BetaBox {
  double beta1_lower = kBetaFloor;
  double beta1_upper = 0.0;
  double beta2_lower = 0.0;
  double beta2_upper = 0.0;
};

class AssemblyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GuardError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Joint control-and-warp optimal control problem.
 *
 * Decision vector: z = [u_0 ... u_{N-1}; beta1; beta2] with inputs stored
 * step-major, dim = m*N + 2. When frozen_warp is set the warp coefficients
 * are constants and dim = m*N.
 *
 * Inequality stack, in order: for each step j, state_ineq on x_{j+1} then
 * path_ineq at step j; terminal_ineq on x_N; the four warp residuals.
 */
struct OcpSpec {
  DynamicsModel model;
  int steps = 10;
  double horizon = 1.0;
  double alpha_lo = 1.0;
  double alpha_hi = 4.0;

  StageCost stage_cost;
  std::vector<PathConstraint> path_ineq;
  std::vector<StateConstraint> state_ineq;
  std::vector<StateConstraint> terminal_ineq;

  Vec u_lower;
  Vec u_upper;
  Vec u_prev;  // previously applied input, feeds the j = 0 stage

  // Box on the warp coefficients; upper bounds default to alpha_hi*T/N and
  // alpha_hi*T/N^2, which the band implies.
  std::optional<BetaBox> beta_box;
  std::optional<std::array<double, 2>> frozen_warp;

  // Divide the summed cost by w(N).
  bool average_cost = true;

  // Input guess for the first solve at prediction time t.
  std::function<Vec(int step, double t)> initial_input;
};

BetaBox resolved_beta_box(const OcpSpec& spec);
int decision_dim(const OcpSpec& spec);
int ineq_rows(const OcpSpec& spec);

/// Everything derived from one decision vector.
struct OcpEvaluation {
  HorizonGrid grid;
  std::vector<Vec> states;  // N + 1
  double summed_cost = 0.0;
  double objective = 0.0;
  Vec ineq;
  Vec gradient;   // filled when derivatives were requested
  Mat jacobian;
};

/// Single-shooting transcription of an OcpSpec at (x_now, t_now).
class OcpProblem {
 public:
  OcpProblem(OcpSpec spec, Vec x_now, double t_now);

  const OcpSpec& spec() const { return spec_; }
  int dim() const { return dim_; }
  int rows() const { return rows_; }

  std::array<double, 2> beta(const Vec& z) const;
  std::vector<Vec> controls(const Vec& z) const;

  /// guard_denominator clamps w(N) from below at 0.5*alpha_lo*T instead of throwing.
  OcpEvaluation evaluate(const Vec& z, bool derivatives, bool guard_denominator = true) const;

  NlpProblem nlp() const;

 private:
  OcpSpec spec_;
  Vec x_now_;
  double t_now_;
  int dim_;
  int rows_;
};

NlpProblem assemble(const OcpSpec& spec, const Vec& x_now, double t_now);

/// Summed stage cost weighted by the intervals, divided by w(N, beta).
/// Throws GuardError when w(N) < 0.5 * alpha_lo * T.
double objective_average(const OcpSpec& spec, const Vec& z, const Vec& x_now, double t_now);

}  // namespace vsmpc
