#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vsmpc/bess.hpp"
#include "vsmpc/controllers.hpp"

namespace vsmpc {

enum class Strategy { vsmpc, uniform, heuristic };

const char* to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct ScenarioConfig {
  bess::BessParams bess;
  bess::WindModel wind;
  Strategy strategy = Strategy::vsmpc;
  double horizon_hours = 24.0;
  double dt_sim = 0.1;
  SolveOptions solver;
  std::optional<BetaBox> beta_box;  // overrides the default warp box for VS-MPC
  bool record_solver_trace = false;

  int plant_steps() const;
  int steps_per_decision() const;
  /// Throws std::invalid_argument when the timing does not line up.
  void validate() const;
};

struct SimRecord {
  double t = 0.0;
  double u = 0.0;
  double forecast = 0.0;
  double actual = 0.0;
  double soc = 0.0;       // at the start of the step
  double soc_next = 0.0;  // after the step (post clamp)
  bess::CostBreakdown cost;
  std::string status;     // solver status at this step's decision, "-" otherwise
  double beta1 = 0.0;
  double beta2 = 0.0;
  double predicted_violation = 0.0;
  bool clamped = false;
};

struct SimAggregates {
  double total_cost = 0.0;  // sum of per-step cost * dt_sim
  double total_revenue = 0.0;
  double average_revenue = 0.0;  // per hour
  int solves = 0;
  int degraded_solves = 0;
  int soc_violations = 0;  // soc_next outside [soc_min, soc_max] by more than 1e-6
  int clamp_events = 0;
  double max_predicted_violation = 0.0;
};

struct TracedIteration {
  double t = 0.0;  // decision time
  IterationRecord iteration;
};

struct SimLog {
  std::vector<SimRecord> records;
  std::vector<TracedIteration> solver_trace;  // filled when record_solver_trace is set
  SimAggregates aggregates;
  double initial_prev_u = 0.0;
  bess::WindTrace wind;
};

/// Aggregates recomputed from the records.
SimAggregates aggregate(const std::vector<SimRecord>& records, double dt_sim, double horizon_hours,
                        double soc_min, double soc_max);

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, SimLog partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const SimLog& partial() const { return partial_; }

 private:
  SimLog partial_;
};

/// Closed-loop run: the controller is invoked every dt_mpc with the true
/// plant state, the plant integrates x' = (w_a - u)/Q_c with Euler steps of
/// dt_sim and SOC is clamped to [0, 1].
SimLog run_scenario(const ScenarioConfig& cfg);

/// Runs independent scenarios on a small thread pool; results keep input order.
std::vector<SimLog> run_sweep(const std::vector<ScenarioConfig>& cfgs, unsigned max_threads = 0);

/// Header: t,u,forecast,actual,soc,soc_next,revenue,reserve,dispatch,ramp,cost,
/// status,beta1,beta2,predicted_violation,clamped. Doubles use %.17g.
void write_simlog(std::ostream& os, const SimLog& log);

/// Header: t,outer,inner_iterations,merit_start,merit_end,violation,stationarity,penalty.
void write_solver_trace(std::ostream& os, const SimLog& log);

// ---------------------------------------------------------------------------

struct RevenueEntry {
  double capacity = 0.0;
  Strategy strategy = Strategy::uniform;
  double revenue = 0.0;
};

/// Capacity x strategy table normalized by the uniform-MPC revenue at the
/// baseline capacity.
struct RevenueTable {
  std::vector<double> capacities;
  std::vector<Strategy> strategies;
  std::vector<std::vector<double>> normalized;  // [capacity][strategy]
  std::vector<double> vs_vs_uniform;            // (R_vs - R_uniform) / R_uniform per capacity
  double baseline = 0.0;
};

class NormalizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

RevenueTable revenue_table(const std::vector<RevenueEntry>& entries, double baseline_capacity = 200.0);

void write_revenue_table(std::ostream& os, const RevenueTable& table);

}  // namespace vsmpc
