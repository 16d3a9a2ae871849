#include "vsmpc/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <thread>

namespace vsmpc {

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::vsmpc: return "vsmpc";
    case Strategy::uniform: return "uniform";
    case Strategy::heuristic: return "heuristic";
  }
  return "unknown";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "vsmpc") return Strategy::vsmpc;
  if (s == "uniform") return Strategy::uniform;
  if (s == "heuristic") return Strategy::heuristic;
  throw std::invalid_argument("unknown strategy '" + s + "' (expected vsmpc, uniform or heuristic)");
}

namespace {

// Integer ratio a / b when it is one up to round-off, otherwise -1.
int integer_ratio(double a, double b) {
  const double r = a / b;
  const double n = std::round(r);
  if (n < 1.0 || std::abs(r - n) > 1e-9 * std::max(1.0, n)) return -1;
  return static_cast<int>(n);
}

constexpr double kSocTolerance = 1e-6;

// Length of the schedule segment that is active at t.
double hold_length(const ControlSchedule& s, double t) {
  auto it = std::upper_bound(s.breakpoints.begin(), s.breakpoints.end(), t);
  if (it != s.breakpoints.begin()) --it;
  const auto next = std::next(it);
  return (next == s.breakpoints.end() ? s.end : *next) - *it;
}

}  // namespace

int ScenarioConfig::plant_steps() const { return integer_ratio(horizon_hours, dt_sim); }
int ScenarioConfig::steps_per_decision() const { return integer_ratio(bess.dt_mpc, dt_sim); }

void ScenarioConfig::validate() const {
  bess.validate();
  if (!(dt_sim > 0.0)) throw std::invalid_argument("dt_sim: must be positive");
  if (steps_per_decision() < 1) throw std::invalid_argument("dt_sim: must divide dt_mpc");
  if (integer_ratio(horizon_hours, bess.dt_mpc) < 1) {
    throw std::invalid_argument("horizon_hours: must be a multiple of dt_mpc");
  }
  if (wind.mode == bess::WindMode::noisy && !(wind.noise_sigma >= 0.0)) {
    throw std::invalid_argument("wind.noise_sigma: must be nonnegative");
  }
}

SimAggregates aggregate(const std::vector<SimRecord>& records, double dt_sim, double horizon_hours,
                        double soc_min, double soc_max) {
  SimAggregates a;
  for (const SimRecord& r : records) {
    a.total_cost += r.cost.total() * dt_sim;
    if (r.status != "-") {
      ++a.solves;
      if (r.status != "converged") ++a.degraded_solves;
      a.max_predicted_violation = std::max(a.max_predicted_violation, r.predicted_violation);
    }
    if (r.soc_next > soc_max + kSocTolerance || r.soc_next < soc_min - kSocTolerance) ++a.soc_violations;
    if (r.clamped) ++a.clamp_events;
  }
  a.total_revenue = -a.total_cost;
  a.average_revenue = a.total_revenue / horizon_hours;
  return a;
}

SimLog run_scenario(const ScenarioConfig& cfg) {
  cfg.validate();
  const bess::BessParams& p = cfg.bess;
  const int steps = cfg.plant_steps();
  const int per_decision = cfg.steps_per_decision();

  SimLog log;
  log.wind = bess::realize_wind(cfg.wind, steps, cfg.dt_sim);
  log.records.reserve(steps);

  double x = p.x0;
  double u_prev = std::clamp(2.0 * p.x0 * cfg.wind.forecast.value(0.0), 0.0, p.nameplate);
  log.initial_prev_u = u_prev;

  ControllerState state;
  state.prev_applied_u = Vec::Constant(1, u_prev);
  ControlSchedule schedule;

  for (int i = 0; i < steps; ++i) {
    const double t = i * cfg.dt_sim;
    SimRecord rec;
    rec.t = t;
    rec.status = "-";
    if (i % per_decision == 0) {
      try {
        if (cfg.strategy == Strategy::heuristic) {
          schedule = heuristic_step(t, x, cfg.wind.forecast.value(t), p.nameplate, p.dt_mpc);
        } else {
          OcpSpec spec = bess::build_bess_ocp(p, cfg.wind.forecast, state.prev_applied_u[0]);
          if (cfg.beta_box) spec.beta_box = cfg.beta_box;
          const Vec xk = Vec::Constant(1, x);
          SolveOptions opts = cfg.solver;
          if (cfg.record_solver_trace) {
            opts.trace = [&log, t, user = cfg.solver.trace](const IterationRecord& r) {
              log.solver_trace.push_back({t, r});
              if (user) user(r);
            };
          }
          const StepOutcome out = cfg.strategy == Strategy::vsmpc
                                      ? vsmpc_step(spec, state, t, xk, p.dt_mpc, opts)
                                      : uniform_mpc_step(spec, state, t, xk, p.dt_mpc, opts);
          schedule = out.schedule;
          state = out.state;
          rec.status = to_string(out.solve.status);
          rec.beta1 = out.beta[0];
          rec.beta2 = out.beta[1];
          rec.predicted_violation = out.predicted_violation;
        }
      } catch (const std::exception& e) {
        log.aggregates = aggregate(log.records, cfg.dt_sim, cfg.horizon_hours, p.soc_min, p.soc_max);
        throw SimulationError("controller failed at t = " + std::to_string(t) + " h after " +
                                  std::to_string(i) + " completed steps: " + e.what(),
                              std::move(log));
      }
    }

    // Integrate every zero-order-hold segment that falls inside this plant
    // step. Perfect wind follows the forecast continuously; noisy and
    // replayed wind hold one sample per plant step.
    rec.forecast = log.wind.forecast[i];
    rec.actual = bess::wind_actual(log.wind, i);
    rec.soc = x;
    const double t_end = t + cfg.dt_sim;
    double seg_start = t;
    double u_sum = 0.0;
    double x_seg = x;
    bool clamped = false;
    while (seg_start < t_end) {
      const double u = schedule.value_at(seg_start)[0];
      const auto next = std::upper_bound(schedule.breakpoints.begin(), schedule.breakpoints.end(),
                                         seg_start);
      double seg_end = next == schedule.breakpoints.end() ? t_end : std::min(*next, t_end);
      // Breakpoints within round-off of the step end belong to the next step.
      if (t_end - seg_end <= 1e-12 * std::max(1.0, t_end)) seg_end = t_end;
      const double len =
          (seg_start == t && seg_end == t_end) ? cfg.dt_sim : seg_end - seg_start;
      const double wind = cfg.wind.mode == bess::WindMode::perfect
                              ? cfg.wind.forecast.value(seg_start)
                              : rec.actual;
      const double wf = cfg.wind.forecast.value(seg_start);
      const bess::CostBreakdown c = bess::realized_cost(u, u_prev, x_seg, wf, wind, p);
      const double w = len / cfg.dt_sim;
      rec.cost.revenue += w * c.revenue;
      rec.cost.reserve += w * c.reserve;
      rec.cost.dispatch += w * c.dispatch;
      // A ramp is an event, not a rate: an input change is charged over the
      // hold time of the new input, whatever the plant step.
      rec.cost.ramp += c.ramp * (hold_length(schedule, seg_start) / cfg.dt_sim);
      u_sum += u * len;
      x_seg += len * bess::soc_derivative(x_seg, u, wind, p.capacity);
      if (x_seg > 1.0 || x_seg < 0.0) {
        x_seg = std::clamp(x_seg, 0.0, 1.0);
        clamped = true;
      }
      u_prev = u;
      seg_start = seg_end;
    }
    rec.u = u_sum / cfg.dt_sim;
    rec.soc_next = x_seg;
    rec.clamped = clamped;
    x = x_seg;
    log.records.push_back(std::move(rec));
  }
  log.aggregates = aggregate(log.records, cfg.dt_sim, cfg.horizon_hours, p.soc_min, p.soc_max);
  return log;
}

std::vector<SimLog> run_sweep(const std::vector<ScenarioConfig>& cfgs, unsigned max_threads) {
  std::vector<SimLog> logs(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  unsigned workers = max_threads ? max_threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, cfgs.size())));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        logs[i] = run_scenario(cfgs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return logs;
}

void write_simlog(std::ostream& os, const SimLog& log) {
  os << "t,u,forecast,actual,soc,soc_next,revenue,reserve,dispatch,ramp,cost,status,beta1,beta2,"
        "predicted_violation,clamped\n";
  char buf[512];
  for (const SimRecord& r : log.records) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.17g,%.17g,"
                  "%.17g,%d\n",
                  r.t, r.u, r.forecast, r.actual, r.soc, r.soc_next, r.cost.revenue, r.cost.reserve,
                  r.cost.dispatch, r.cost.ramp, r.cost.total(), r.status.c_str(), r.beta1, r.beta2,
                  r.predicted_violation, r.clamped ? 1 : 0);
    os << buf;
  }
}

void write_solver_trace(std::ostream& os, const SimLog& log) {
  os << "t,outer,inner_iterations,merit_start,merit_end,violation,stationarity,penalty\n";
  char buf[256];
  for (const TracedIteration& r : log.solver_trace) {
    const IterationRecord& it = r.iteration;
    std::snprintf(buf, sizeof buf, "%.17g,%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, it.outer,
                  it.inner_iterations, it.merit_start, it.merit_end, it.violation, it.stationarity,
                  it.penalty);
    os << buf;
  }
}

// ---------------------------------------------------------------------------

RevenueTable revenue_table(const std::vector<RevenueEntry>& entries, double baseline_capacity) {
  RevenueTable table;
  std::map<std::pair<double, int>, double> cells;
  for (const RevenueEntry& e : entries) {
    if (std::find(table.capacities.begin(), table.capacities.end(), e.capacity) == table.capacities.end()) {
      table.capacities.push_back(e.capacity);
    }
    if (std::find(table.strategies.begin(), table.strategies.end(), e.strategy) == table.strategies.end()) {
      table.strategies.push_back(e.strategy);
    }
    cells[{e.capacity, static_cast<int>(e.strategy)}] = e.revenue;
  }
  std::sort(table.capacities.begin(), table.capacities.end());
  std::sort(table.strategies.begin(), table.strategies.end());

  const auto base = cells.find({baseline_capacity, static_cast<int>(Strategy::uniform)});
  if (base == cells.end()) {
    throw NormalizationError("revenue table needs the uniform-MPC run at " +
                             std::to_string(baseline_capacity) + " MWh as baseline");
  }
  if (!(base->second > 0.0)) {
    throw NormalizationError("baseline revenue is not positive");
  }
  table.baseline = base->second;

  const double nan = std::nan("");
  for (double cap : table.capacities) {
    std::vector<double> row;
    for (Strategy s : table.strategies) {
      const auto it = cells.find({cap, static_cast<int>(s)});
      row.push_back(it == cells.end() ? nan : it->second / table.baseline);
    }
    table.normalized.push_back(std::move(row));
    const auto vs = cells.find({cap, static_cast<int>(Strategy::vsmpc)});
    const auto un = cells.find({cap, static_cast<int>(Strategy::uniform)});
    table.vs_vs_uniform.push_back(vs != cells.end() && un != cells.end()
                                      ? (vs->second - un->second) / un->second
                                      : nan);
  }
  return table;
}

void write_revenue_table(std::ostream& os, const RevenueTable& table) {
  os << "capacity_mwh";
  for (Strategy s : table.strategies) os << ',' << to_string(s);
  os << ",vsmpc_vs_uniform\n";
  char buf[64];
  for (std::size_t i = 0; i < table.capacities.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", table.capacities[i]);
    os << buf;
    for (double v : table.normalized[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", table.vs_vs_uniform[i]);
    os << buf;
  }
}

}  // namespace vsmpc
