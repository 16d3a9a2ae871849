#include "vsmpc/bess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace vsmpc::bess {

void BessParams::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (!(capacity > 0.0)) fail("capacity", "must be positive");
  if (!(nameplate > 0.0)) fail("nameplate", "must be positive");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0)) {
    fail("soc_min/soc_max", "need 0 <= soc_min < soc_max <= 1");
  }
  if (steps < 1) fail("steps", "must be at least 1");
  if (!(horizon > 0.0)) fail("horizon", "must be positive");
  if (!(alpha_lo > 0.0 && alpha_hi >= alpha_lo)) fail("alpha_lo/alpha_hi", "need 0 < alpha_lo <= alpha_hi");
  if (!(dt_mpc > 0.0)) fail("dt_mpc", "must be positive");
  if (!(x0 >= 0.0 && x0 <= 1.0)) fail("x0", "must lie in [0, 1]");
}

double smooth_abs(double x) { return std::sqrt(x * x + kSmoothing); }
double smooth_abs_derivative(double x) { return x / std::sqrt(x * x + kSmoothing); }
double smooth_pos(double x) { return 0.5 * (x + std::sqrt(x * x + kSmoothing)); }
double smooth_pos_derivative(double x) { return 0.5 * (1.0 + x / std::sqrt(x * x + kSmoothing)); }

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }

// min(Q_c x, Q_n): the discharge limit on [0, 1] for either capacity branch.
double discharge_limit(double x, const BessParams& p) {
  return std::min(p.capacity * x, p.nameplate);
}

// C1 surrogate of the discharge limit and its x-derivative.
double smooth_discharge_limit(double x, const BessParams& p, double* dx) {
  if (p.capacity <= p.nameplate) {
    if (dx) *dx = p.capacity;
    return p.capacity * x;
  }
  const double gap = p.nameplate - p.capacity * x;
  if (dx) *dx = p.capacity * smooth_pos_derivative(gap);
  return p.nameplate - smooth_pos(gap);
}

}  // namespace

double soc_derivative(double /*x*/, double u, double wind, double capacity) {
  return (wind - u) / capacity;
}

PowerLimits power_limits(double x, double capacity, double nameplate) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw DomainError("state of charge " + std::to_string(x) + " is outside [0, 1]");
  }
  if (capacity <= nameplate) return {capacity * x, capacity * (x - 1.0)};
  const double knee_hi = nameplate / capacity;
  const double knee_lo = 1.0 - nameplate / capacity;
  const double discharge = x <= knee_hi ? capacity * x : nameplate;
  const double charge = x <= knee_lo ? -nameplate : capacity * (x - 1.0);
  return {discharge, charge};
}

double predicted_stage_cost(double x, double u, double u_prev, double forecast,
                            const BessParams& p, Kinks kinks) {
  const Prices& a = p.prices;
  const double reserve_price = a.reserve_scheduling + a.reserve_dispatch;
  const double ramp = u - u_prev;
  switch (kinks) {
    case Kinks::smooth: {
      const double excess = u - forecast - smooth_discharge_limit(x, p, nullptr);
      return -a.generation * u + reserve_price * smooth_pos(excess) + a.ramping * smooth_abs(ramp);
    }
    case Kinks::exact:
      return -a.generation * u + reserve_price * pos(pos(u - forecast) - discharge_limit(x, p)) +
             a.ramping * smooth_abs(ramp);
    case Kinks::exact_abs:
      return -a.generation * u + reserve_price * pos(pos(u - forecast) - discharge_limit(x, p)) +
             a.ramping * std::abs(ramp);
  }
  return 0.0;
}

CostBreakdown realized_cost(double u, double u_prev, double x, double forecast, double actual,
                            const BessParams& p) {
  const Prices& a = p.prices;
  const double limit = power_limits(x, p.capacity, p.nameplate).discharge;
  CostBreakdown c;
  c.revenue = -a.generation * u;
  c.reserve = a.reserve_scheduling * pos(pos(u - forecast) - limit);
  c.dispatch = a.reserve_dispatch * pos(pos(u - actual) - limit);
  c.ramp = a.ramping * std::abs(u - u_prev);
  return c;
}

// ---------------------------------------------------------------------------

double wind_forecast(double t) {
  constexpr double pi = std::numbers::pi;
  return 120.0 * std::sin(pi * t / 3.0) + 100.0 * std::sin(2.0 * pi * (t + 2.0) / 3.0 + 0.4) + 150.0;
}

double wind_forecast_rate(double t) {
  constexpr double pi = std::numbers::pi;
  return 120.0 * (pi / 3.0) * std::cos(pi * t / 3.0) +
         100.0 * (2.0 * pi / 3.0) * std::cos(2.0 * pi * (t + 2.0) / 3.0 + 0.4);
}

const char* to_string(WindMode mode) {
  switch (mode) {
    case WindMode::perfect: return "perfect";
    case WindMode::noisy: return "noisy";
    case WindMode::replay: return "replay";
  }
  return "unknown";
}

WindMode wind_mode_from_string(const std::string& s) {
  if (s == "perfect") return WindMode::perfect;
  if (s == "noisy") return WindMode::noisy;
  if (s == "replay") return WindMode::replay;
  throw std::invalid_argument("unknown wind mode '" + s + "'");
}

WindTrace realize_wind(const WindModel& model, int steps, double dt) {
  if (model.mode == WindMode::replay) {
    if (model.replay.actual.size() < static_cast<std::size_t>(steps)) {
      throw std::invalid_argument("replayed wind trace has " +
                                  std::to_string(model.replay.actual.size()) +
                                  " samples, need " + std::to_string(steps));
    }
    WindTrace trace = model.replay;
    trace.time.resize(steps);
    trace.forecast.resize(steps);
    trace.actual.resize(steps);
    return trace;
  }
  WindTrace trace;
  trace.time.reserve(steps);
  trace.forecast.reserve(steps);
  trace.actual.reserve(steps);
  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> noise(0.0, model.noise_sigma);
  for (int i = 0; i < steps; ++i) {
    const double t = i * dt;
    const double wf = model.forecast.value(t);
    trace.time.push_back(t);
    trace.forecast.push_back(wf);
    trace.actual.push_back(model.mode == WindMode::noisy ? std::max(0.0, wf + noise(rng)) : wf);
  }
  return trace;
}

double wind_actual(const WindTrace& trace, int step) {
  return trace.actual.at(static_cast<std::size_t>(step));
}

void write_wind_trace(std::ostream& os, const WindTrace& trace) {
  os << "time,forecast,actual\n";
  char buf[128];
  for (std::size_t i = 0; i < trace.actual.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", trace.time[i], trace.forecast[i],
                  trace.actual[i]);
    os << buf;
  }
}

WindTrace read_wind_trace(std::istream& is) {
  WindTrace trace;
  std::string line;
  if (!std::getline(is, line) || line.rfind("time,forecast,actual", 0) != 0) {
    throw std::invalid_argument("wind trace is missing the 'time,forecast,actual' header");
  }
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    double v[3];
    char sep;
    if (!(row >> v[0] >> sep >> v[1] >> sep >> v[2])) {
      throw std::invalid_argument("wind trace line " + std::to_string(lineno) + " is malformed");
    }
    trace.time.push_back(v[0]);
    trace.forecast.push_back(v[1]);
    trace.actual.push_back(v[2]);
  }
  return trace;
}

// ---------------------------------------------------------------------------

OcpSpec build_bess_ocp(const BessParams& p, const Forecast& forecast, double u_prev) {
  p.validate();
  OcpSpec spec;
  spec.steps = p.steps;
  spec.horizon = p.horizon;
  spec.alpha_lo = p.alpha_lo;
  spec.alpha_hi = p.alpha_hi;

  const double qc = p.capacity;
  const double qn = p.nameplate;

  spec.model.state_dim = 1;
  spec.model.input_dim = 1;
  spec.model.rhs = [forecast, qc](const Vec& x, const Vec& u, double t) {
    Vec dx(1);
    dx[0] = soc_derivative(x[0], u[0], forecast.value(t), qc);
    return dx;
  };
  spec.model.jacobian = [forecast, qc](const Vec&, const Vec&, double t) {
    ModelJacobian j;
    j.dx = Mat::Zero(1, 1);
    j.du = Mat::Constant(1, 1, -1.0 / qc);
    j.dt = Vec::Constant(1, forecast.rate(t) / qc);
    return j;
  };

  spec.stage_cost.value = [p, forecast](const StageArgs& a) {
    return predicted_stage_cost(a.x[0], a.u[0], a.u_prev[0], forecast.value(a.t), p);
  };
  spec.stage_cost.gradient = [p, forecast](const StageArgs& a) {
    const Prices& pr = p.prices;
    const double reserve_price = pr.reserve_scheduling + pr.reserve_dispatch;
    double dlimit = 0.0;
    const double excess = a.u[0] - forecast.value(a.t) - smooth_discharge_limit(a.x[0], p, &dlimit);
    const double ds = reserve_price * smooth_pos_derivative(excess);
    const double dl = pr.ramping * smooth_abs_derivative(a.u[0] - a.u_prev[0]);
    StageGradient g;
    g.dx = Vec::Constant(1, -ds * dlimit);
    g.du = Vec::Constant(1, -pr.generation + ds + dl);
    g.du_prev = Vec::Constant(1, -dl);
    g.ddelta = 0.0;
    g.dt = -ds * forecast.rate(a.t);
    return g;
  };

  StateConstraint soc;
  soc.rows = 2;
  soc.value = [lo = p.soc_min, hi = p.soc_max](const Vec& x) {
    Vec v(2);
    v << x[0] - hi, lo - x[0];
    return v;
  };
  soc.jacobian = [](const Vec&) {
    Mat j(2, 1);
    j << 1.0, -1.0;
    return j;
  };
  spec.state_ineq.push_back(std::move(soc));

  PathConstraint band;
  band.rows = 4;
  band.value = [forecast, qc, qn](const StageArgs& a) {
    const double net = a.u[0] - forecast.value(a.t);
    Vec v(4);
    v << net - qc * a.x[0], net - qn, qc * (a.x[0] - 1.0) - net, -qn - net;
    return v;
  };
  band.jacobian = [forecast, qc](const StageArgs& a) {
    const double rate = forecast.rate(a.t);
    PathJacobian j;
    j.dx.resize(4, 1);
    j.dx << -qc, 0.0, qc, 0.0;
    j.du.resize(4, 1);
    j.du << 1.0, 1.0, -1.0, -1.0;
    j.ddelta = Vec::Zero(4);
    j.dt.resize(4);
    j.dt << -rate, -rate, rate, rate;
    return j;
  };
  spec.path_ineq.push_back(std::move(band));

  spec.u_lower = Vec::Zero(1);
  spec.u_upper = Vec::Constant(1, qn);
  spec.u_prev = Vec::Constant(1, u_prev);
  spec.average_cost = true;
  spec.initial_input = [forecast, qn](int, double t) {
    return Vec::Constant(1, std::clamp(forecast.value(t), 0.0, qn));
  };
  return spec;
}

}  // namespace vsmpc::bess
