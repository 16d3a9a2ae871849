#pragma once

#include <functional>
#include <optional>
#include <string>

#include "vsmpc/numdiff.hpp"

namespace vsmpc {

/**
 * Smooth nonlinear program
 *
 *   min f(z)  s.t.  g(z) <= 0,  h(z) = 0,  lower <= z <= upper.
 *
 * Every derivative callback is optional; missing ones are replaced by central
 * differences. Empty ineq / eq callbacks mean no rows of that kind. Bounds
 * may be infinite; lower == upper pins a coordinate.
 */
struct NlpProblem {
  int dim = 0;
  std::function<double(const Vec&)> objective;
  std::function<Vec(const Vec&)> gradient;
  std::function<Vec(const Vec&)> ineq;
  std::function<Mat(const Vec&)> ineq_jacobian;
  std::function<Vec(const Vec&)> eq;
  std::function<Mat(const Vec&)> eq_jacobian;
  Vec lower;
  Vec upper;
};

enum class SolveStatus { converged, max_iter, infeasible_detected };

const char* to_string(SolveStatus status);

/// One record per outer (multiplier) iteration.
struct IterationRecord {
  int outer = 0;
  int inner_iterations = 0;
  double merit_start = 0.0;  // augmented Lagrangian before the inner solve
  double merit_end = 0.0;    // same multipliers and penalty, after it
  double violation = 0.0;
  double stationarity = 0.0;
  double penalty = 0.0;
};

struct SolveOptions {
  double tol_feas = 1e-6;
  double tol_stat = 1e-5;
  int max_outer = 50;
  int max_inner = 200;
  double fd_step = kDefaultFdStep;
  double initial_penalty = 10.0;
  std::function<void(const IterationRecord&)> trace;
};

struct SolveResult {
  Vec z_opt;
  double f_opt = 0.0;
  double max_violation = 0.0;
  // Infinity norm of the box-projected Lagrangian gradient, measured in
  // box-normalized coordinates (each bounded coordinate divided by its range).
  double stationarity = 0.0;
  int iterations = 0;  // inner iterations summed over outer iterations
  int outer_iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  std::optional<Vec> bad_point;  // set when an evaluation was non-finite
  std::string message;
};

/// max over [g(z)]^+ and |h(z)|; zero when the problem has no rows.
double max_violation(const NlpProblem& problem, const Vec& z);

/// Augmented-Lagrangian outer loop with a projected quasi-Newton inner solve.
/// Deterministic for identical inputs; never throws on evaluation failures.
SolveResult solve(const NlpProblem& problem, const Vec& z0, const SolveOptions& opts = {});

}  // namespace vsmpc
