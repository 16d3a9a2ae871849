#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vsmpc {

/// Numeric floor standing in for the strict positivity of the linear warp
/// coefficient (hours per sample step).
inline constexpr double kBetaFloor = 1e-4;

class ConstraintViolation : public std::runtime_error {
 public:
  ConstraintViolation(std::string bound, const std::string& what)
      : std::runtime_error(what), bound_(std::move(bound)) {}
  const std::string& bound() const { return bound_; }

 private:
  std::string bound_;
};

/**
 * Coefficients of the degree-2 time warp w(tau) = beta1 * tau + beta2 * tau^2
 * together with the horizon data the warp has to respect.
 *
 * A feasible warp satisfies beta1 >= kBetaFloor, beta2 >= 0 and
 * alpha_lo * horizon <= w(steps) <= alpha_hi * horizon.
 */
struct WarpParams {
  double beta1 = 0.1;
  double beta2 = 0.0;
  int steps = 10;          // N
  double horizon = 1.0;    // T [h]
  double alpha_lo = 1.0;
  double alpha_hi = 4.0;
};

/// Sampling intervals produced by a warp. cumulative has steps + 1 entries,
/// cumulative[0] = 0.
struct HorizonGrid {
  std::vector<double> deltas;
  std::vector<double> cumulative;

  std::size_t size() const { return deltas.size(); }
  double total() const { return cumulative.back(); }
};

double warp_eval(const WarpParams& p, double tau);

/// Signed residuals, negative means satisfied. Fixed order:
/// [alpha_lo*T - w(N), w(N) - alpha_hi*T, kBetaFloor - beta1, -beta2].
std::array<double, 4> warp_feasibility_residuals(const WarpParams& p);

/// Validates p and returns its grid. Throws ConstraintViolation naming the
/// first violated bound.
HorizonGrid warp_intervals(const WarpParams& p);

/// Grid for arbitrary coefficients, no feasibility check. Used for solver
/// iterates that may sit outside the horizon band.
HorizonGrid warp_grid(double beta1, double beta2, int steps);

/// Grid with every interval equal to step.
HorizonGrid uniform_grid(double step, int steps);

}  // namespace vsmpc
