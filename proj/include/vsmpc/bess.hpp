#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsmpc/ocp.hpp"

namespace vsmpc::bess {

/// Unit prices of generation, reserve scheduling, reserve dispatch and ramping.
struct Prices {
  double generation = 1.0;
  double reserve_scheduling = 1.03;
  double reserve_dispatch = 1.0;
  double ramping = 0.5455;
};

struct BessParams {
  double nameplate = 400.0;  // Q_n
  double capacity = 400.0;   // Q_c [MWh]
  double soc_min = 0.3;
  double soc_max = 0.9;
  Prices prices;
  int steps = 10;          // N
  double horizon = 1.0;    // T [h]
  double alpha_lo = 1.0;
  double alpha_hi = 4.0;
  double dt_mpc = 0.1;     // [h]
  double x0 = 0.4;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kSmoothing = 0.01;

/// sqrt(x^2 + 0.01), the smooth absolute value used for the ramp term.
double smooth_abs(double x);
double smooth_abs_derivative(double x);
/// (x + sqrt(x^2 + 0.01)) / 2, the smooth positive part used inside the optimizer.
double smooth_pos(double x);
double smooth_pos_derivative(double x);

/// SOC rate (w_a - u) / Q_c [1/h].
double soc_derivative(double x, double u, double wind, double capacity);

struct PowerLimits {
  double discharge;  // upper limit, >= 0
  double charge;     // lower limit, <= 0
};

/// Throws DomainError when x is outside [0, 1].
PowerLimits power_limits(double x, double capacity, double nameplate);

enum class Kinks {
  smooth,     // smooth positive part and smooth ramp: the optimizer's surrogate
  exact,      // exact positive parts, smooth ramp
  exact_abs,  // exact positive parts and exact absolute ramp
};

/// Predicted stage cost at one horizon step given the forecast wind there.
double predicted_stage_cost(double x, double u, double u_prev, double forecast,
                            const BessParams& p, Kinks kinks = Kinks::smooth);

/// Per-step realized cost, split into its four components (total = sum).
struct CostBreakdown {
  double revenue = 0.0;   // -alpha1 * u
  double reserve = 0.0;   // scheduling penalty
  double dispatch = 0.0;  // shortage penalty
  double ramp = 0.0;
  double total() const { return revenue + reserve + dispatch + ramp; }
};

CostBreakdown realized_cost(double u, double u_prev, double x, double forecast, double actual,
                            const BessParams& p);

// ---------------------------------------------------------------------------
// Wind

/// 120 sin(pi t / 3) + 100 sin(2 pi (t + 2) / 3 + 0.4) + 150  [MW]
double wind_forecast(double t);
double wind_forecast_rate(double t);

struct Forecast {
  std::function<double(double)> value = wind_forecast;
  std::function<double(double)> rate = wind_forecast_rate;
};

enum class WindMode { perfect, noisy, replay };

const char* to_string(WindMode mode);
WindMode wind_mode_from_string(const std::string& s);

/// Realized wind samples, one per plant step.
struct WindTrace {
  std::vector<double> time;
  std::vector<double> forecast;
  std::vector<double> actual;
};

struct WindModel {
  WindMode mode = WindMode::perfect;
  double noise_sigma = 40.0;  // [MW]
  std::uint64_t seed = 1;
  Forecast forecast;
  WindTrace replay;  // used in replay mode
};

/// Actual wind for `steps` plant steps of length dt. Noisy mode draws one
/// N(0, sigma^2) sample per step from a generator seeded with model.seed and
/// clips negative values to zero. Replay mode returns the stored trace.
WindTrace realize_wind(const WindModel& model, int steps, double dt);

/// Actual wind at plant step `step` of a realized trace.
double wind_actual(const WindTrace& trace, int step);

void write_wind_trace(std::ostream& os, const WindTrace& trace);
WindTrace read_wind_trace(std::istream& is);

// ---------------------------------------------------------------------------
// Optimal control problem

/**
 * Builds the battery dispatch problem. Rows per step j, in order:
 *   x_{j+1} - soc_max, soc_min - x_{j+1},
 *   (u - w_f) - Q_c x_j, (u - w_f) - Q_n, Q_c (x_j - 1) - (u - w_f), -Q_n - (u - w_f).
 * The last four are the power band P_lo(x) <= u - w_f <= P_hi(x) with the
 * piecewise limits split into their smooth pieces.
 */
OcpSpec build_bess_ocp(const BessParams& p, const Forecast& forecast, double u_prev);

}  // namespace vsmpc::bess
