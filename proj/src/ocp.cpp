#include "vsmpc/ocp.hpp"

#include <cmath>
#include <mutex>
#include <utility>

namespace vsmpc {

namespace {

constexpr double kGuardFraction = 0.5;

// Central-difference fallback for stage costs without an analytic gradient.
StageGradient stage_gradient(const StageCost& cost, const StageArgs& a) {
  if (cost.gradient) return cost.gradient(a);
  StageGradient g;
  g.dx = finite_diff_gradient(
      [&](const Vec& x) { return cost.value({a.step, x, a.u, a.u_prev, a.delta, a.t}); }, a.x);
  g.du = finite_diff_gradient(
      [&](const Vec& u) { return cost.value({a.step, a.x, u, a.u_prev, a.delta, a.t}); }, a.u);
  g.du_prev = finite_diff_gradient(
      [&](const Vec& up) { return cost.value({a.step, a.x, a.u, up, a.delta, a.t}); }, a.u_prev);
  Vec s(1);
  s << a.delta;
  g.ddelta = finite_diff_gradient(
      [&](const Vec& d) { return cost.value({a.step, a.x, a.u, a.u_prev, d[0], a.t}); }, s)[0];
  s << a.t;
  g.dt = finite_diff_gradient(
      [&](const Vec& t) { return cost.value({a.step, a.x, a.u, a.u_prev, a.delta, t[0]}); }, s)[0];
  return g;
}

PathJacobian path_jacobian(const PathConstraint& c, const StageArgs& a) {
  if (c.jacobian) return c.jacobian(a);
  PathJacobian j;
  j.dx = finite_diff_jacobian(
      [&](const Vec& x) { return c.value({a.step, x, a.u, a.u_prev, a.delta, a.t}); }, a.x);
  j.du = finite_diff_jacobian(
      [&](const Vec& u) { return c.value({a.step, a.x, u, a.u_prev, a.delta, a.t}); }, a.u);
  Vec s(1);
  s << a.delta;
  j.ddelta = finite_diff_jacobian(
      [&](const Vec& d) { return c.value({a.step, a.x, a.u, a.u_prev, d[0], a.t}); }, s).col(0);
  s << a.t;
  j.dt = finite_diff_jacobian(
      [&](const Vec& t) { return c.value({a.step, a.x, a.u, a.u_prev, a.delta, t[0]}); }, s).col(0);
  return j;
}

Mat state_jacobian(const StateConstraint& c, const Vec& x) {
  if (c.jacobian) return c.jacobian(x);
  return finite_diff_jacobian(c.value, x);
}

void check_rows(const Vec& v, int expected, const char* what) {
  if (v.size() != expected) {
    throw AssemblyError(std::string(what) + " returned " + std::to_string(v.size()) +
                        " rows, expected " + std::to_string(expected));
  }
}

}  // namespace

BetaBox resolved_beta_box(const OcpSpec& spec) {
  if (spec.beta_box) return *spec.beta_box;
  BetaBox box;
  const double n = static_cast<double>(spec.steps);
  box.beta1_upper = spec.alpha_hi * spec.horizon / n;
  box.beta2_upper = spec.alpha_hi * spec.horizon / (n * n);
  return box;
}

int decision_dim(const OcpSpec& spec) {
  return spec.model.input_dim * spec.steps + (spec.frozen_warp ? 0 : 2);
}

int ineq_rows(const OcpSpec& spec) {
  int per_step = 0;
  for (const auto& c : spec.state_ineq) per_step += c.rows;
  for (const auto& c : spec.path_ineq) per_step += c.rows;
  int total = per_step * spec.steps;
  for (const auto& c : spec.terminal_ineq) total += c.rows;
  if (!spec.frozen_warp) total += 4;
  return total;
}

OcpProblem::OcpProblem(OcpSpec spec, Vec x_now, double t_now)
    : spec_(std::move(spec)), x_now_(std::move(x_now)), t_now_(t_now) {
  const int n = spec_.model.state_dim;
  const int m = spec_.model.input_dim;
  if (spec_.steps < 1) throw AssemblyError("horizon needs at least one step");
  if (n < 1 || m < 1) throw AssemblyError("model dimensions must be positive");
  if (!spec_.model.rhs) throw AssemblyError("model has no right-hand side");
  if (!spec_.stage_cost.value) throw AssemblyError("stage cost is missing");
  if (x_now_.size() != n) throw AssemblyError("current state has the wrong dimension");
  if (!x_now_.allFinite()) throw AssemblyError("current state is not finite");
  if (spec_.u_lower.size() != m || spec_.u_upper.size() != m) {
    throw AssemblyError("input bounds have the wrong dimension");
  }
  if ((spec_.u_lower.array() > spec_.u_upper.array()).any()) {
    throw AssemblyError("input lower bound exceeds upper bound");
  }
  if (spec_.u_prev.size() == 0) spec_.u_prev = Vec::Zero(m);
  if (spec_.u_prev.size() != m) throw AssemblyError("previous input has the wrong dimension");
  if (!spec_.frozen_warp) {
    const BetaBox box = resolved_beta_box(spec_);
    if (box.beta1_lower > box.beta1_upper || box.beta2_lower > box.beta2_upper) {
      throw AssemblyError("warp coefficient box is empty");
    }
  }
  dim_ = decision_dim(spec_);
  rows_ = ineq_rows(spec_);
}

std::array<double, 2> OcpProblem::beta(const Vec& z) const {
  if (spec_.frozen_warp) return *spec_.frozen_warp;
  const int base = spec_.model.input_dim * spec_.steps;
  return {z[base], z[base + 1]};
}

std::vector<Vec> OcpProblem::controls(const Vec& z) const {
  const int m = spec_.model.input_dim;
  std::vector<Vec> u(static_cast<std::size_t>(spec_.steps));
  for (int j = 0; j < spec_.steps; ++j) u[j] = z.segment(j * m, m);
  return u;
}

OcpEvaluation OcpProblem::evaluate(const Vec& z, bool derivatives, bool guard_denominator) const {
  const int n = spec_.model.state_dim;
  const int m = spec_.model.input_dim;
  const int steps = spec_.steps;
  const bool free_warp = !spec_.frozen_warp;
  const int b1 = m * steps;  // column of beta1 when free
  if (z.size() != dim_) throw AssemblyError("decision vector has the wrong dimension");

  const auto [beta1, beta2] = beta(z);
  OcpEvaluation ev;
  ev.grid = warp_grid(beta1, beta2, steps);
  const std::vector<Vec> u = controls(z);
  ev.ineq.resize(rows_);
  if (derivatives) {
    ev.gradient = Vec::Zero(dim_);
    ev.jacobian = Mat::Zero(rows_, dim_);
  }

  // Sensitivity of x_j with respect to z.
  Mat sens = Mat::Zero(n, derivatives ? dim_ : 0);
  Vec grad_sum = derivatives ? Vec::Zero(dim_) : Vec();
  ev.states.reserve(steps + 1);
  ev.states.push_back(x_now_);
  int row = 0;
  for (int j = 0; j < steps; ++j) {
    const double tau = static_cast<double>(j);
    const double delta = ev.grid.deltas[j];
    const double t = t_now_ + ev.grid.cumulative[j];
    const Vec& x = ev.states[j];
    const Vec& up = j == 0 ? spec_.u_prev : u[j - 1];
    const StageArgs args{j, x, u[j], up, delta, t};
    // d(delta_j)/d(beta) and d(t_j)/d(beta)
    const double ddelta_b1 = 1.0, ddelta_b2 = 2.0 * tau + 1.0;
    const double dt_b1 = tau, dt_b2 = tau * tau;

    const double cost = spec_.stage_cost.value(args);
    if (!std::isfinite(cost)) throw IntegrationError(j, "stage cost is not finite");
    ev.summed_cost += cost * delta;

    const Vec f = spec_.model.rhs(x, u[j], t);
    if (f.size() != n) throw AssemblyError("dynamics returned the wrong dimension");
    if (!f.allFinite()) throw IntegrationError(j, "dynamics returned a non-finite derivative");
    const Vec x_next = x + delta * f;

    Mat sens_next;
    if (derivatives) {
      const StageGradient cg = stage_gradient(spec_.stage_cost, args);
      // d(cost_j)/dz
      Vec dc = sens.transpose() * cg.dx;
      dc.segment(j * m, m) += cg.du;
      if (j > 0) dc.segment((j - 1) * m, m) += cg.du_prev;
      if (free_warp) {
        dc[b1] += cg.ddelta * ddelta_b1 + cg.dt * dt_b1;
        dc[b1 + 1] += cg.ddelta * ddelta_b2 + cg.dt * dt_b2;
      }
      grad_sum += delta * dc;
      if (free_warp) {
        grad_sum[b1] += cost * ddelta_b1;
        grad_sum[b1 + 1] += cost * ddelta_b2;
      }

      const ModelJacobian fj = model_jacobian(spec_.model, x, u[j], t);
      sens_next = sens + delta * fj.dx * sens;
      sens_next.middleCols(j * m, m) += delta * fj.du;
      if (free_warp) {
        sens_next.col(b1) += f * ddelta_b1 + delta * fj.dt * dt_b1;
        sens_next.col(b1 + 1) += f * ddelta_b2 + delta * fj.dt * dt_b2;
      }
    }

    for (const auto& c : spec_.state_ineq) {
      const Vec v = c.value(x_next);
      check_rows(v, c.rows, "state constraint");
      ev.ineq.segment(row, c.rows) = v;
      if (derivatives) ev.jacobian.middleRows(row, c.rows) = state_jacobian(c, x_next) * sens_next;
      row += c.rows;
    }
    for (const auto& c : spec_.path_ineq) {
      const Vec v = c.value(args);
      check_rows(v, c.rows, "path constraint");
      ev.ineq.segment(row, c.rows) = v;
      if (derivatives) {
        const PathJacobian pj = path_jacobian(c, args);
        auto block = ev.jacobian.middleRows(row, c.rows);
        block = pj.dx * sens;
        block.middleCols(j * m, m) += pj.du;
        if (free_warp) {
          block.col(b1) += pj.ddelta * ddelta_b1 + pj.dt * dt_b1;
          block.col(b1 + 1) += pj.ddelta * ddelta_b2 + pj.dt * dt_b2;
        }
      }
      row += c.rows;
    }

    ev.states.push_back(x_next);
    if (derivatives) sens = std::move(sens_next);
  }

  for (const auto& c : spec_.terminal_ineq) {
    const Vec v = c.value(ev.states.back());
    check_rows(v, c.rows, "terminal constraint");
    ev.ineq.segment(row, c.rows) = v;
    if (derivatives) ev.jacobian.middleRows(row, c.rows) = state_jacobian(c, ev.states.back()) * sens;
    row += c.rows;
  }

  const double nn = static_cast<double>(steps);
  const double end = ev.grid.total();
  if (free_warp) {
    WarpParams wp{beta1, beta2, steps, spec_.horizon, spec_.alpha_lo, spec_.alpha_hi};
    const auto res = warp_feasibility_residuals(wp);
    for (int i = 0; i < 4; ++i) ev.ineq[row + i] = res[i];
    if (derivatives) {
      ev.jacobian(row, b1) = -nn;
      ev.jacobian(row, b1 + 1) = -nn * nn;
      ev.jacobian(row + 1, b1) = nn;
      ev.jacobian(row + 1, b1 + 1) = nn * nn;
      ev.jacobian(row + 2, b1) = -1.0;
      ev.jacobian(row + 3, b1 + 1) = -1.0;
    }
    row += 4;
  }

  if (!spec_.average_cost) {
    ev.objective = ev.summed_cost;
    if (derivatives) ev.gradient = grad_sum;
    return ev;
  }

  const double floor = kGuardFraction * spec_.alpha_lo * spec_.horizon;
  double denom = end;
  bool clamped = false;
  if (end < floor) {
    if (!guard_denominator) {
      throw GuardError("w(N) = " + std::to_string(end) + " is below the averaging guard " +
                       std::to_string(floor));
    }
    denom = floor;
    clamped = true;
  }
  ev.objective = ev.summed_cost / denom;
  if (derivatives) {
    ev.gradient = grad_sum / denom;
    if (free_warp && !clamped) {
      ev.gradient[b1] -= ev.summed_cost * nn / (denom * denom);
      ev.gradient[b1 + 1] -= ev.summed_cost * nn * nn / (denom * denom);
    }
  }
  return ev;
}

namespace {

// Remembers the last evaluation so that value, rows and derivatives at one
// point share a single rollout.
struct EvaluationCache {
  std::shared_ptr<const OcpProblem> problem;
  std::mutex mutex;
  Vec z;
  bool with_derivatives = false;
  OcpEvaluation ev;

  template <typename F>
  auto get(const Vec& point, bool derivatives, F&& pick) {
    std::lock_guard<std::mutex> lock(mutex);
    const bool hit = z.size() == point.size() && z == point && (with_derivatives || !derivatives);
    if (!hit) {
      ev = problem->evaluate(point, derivatives);
      z = point;
      with_derivatives = derivatives;
    }
    return pick(ev);
  }
};

}  // namespace

NlpProblem OcpProblem::nlp() const {
  auto cache = std::make_shared<EvaluationCache>();
  cache->problem = std::make_shared<const OcpProblem>(*this);
  NlpProblem p;
  p.dim = dim_;
  p.objective = [cache](const Vec& z) {
    return cache->get(z, false, [](const OcpEvaluation& e) { return e.objective; });
  };
  p.gradient = [cache](const Vec& z) {
    return cache->get(z, true, [](const OcpEvaluation& e) { return e.gradient; });
  };
  if (rows_ > 0) {
    p.ineq = [cache](const Vec& z) {
      return cache->get(z, false, [](const OcpEvaluation& e) { return e.ineq; });
    };
    p.ineq_jacobian = [cache](const Vec& z) {
      return cache->get(z, true, [](const OcpEvaluation& e) { return e.jacobian; });
    };
  }
  const int m = spec_.model.input_dim;
  p.lower.resize(dim_);
  p.upper.resize(dim_);
  for (int j = 0; j < spec_.steps; ++j) {
    p.lower.segment(j * m, m) = spec_.u_lower;
    p.upper.segment(j * m, m) = spec_.u_upper;
  }
  if (!spec_.frozen_warp) {
    const BetaBox box = resolved_beta_box(spec_);
    const int b1 = m * spec_.steps;
    p.lower[b1] = box.beta1_lower;
    p.upper[b1] = box.beta1_upper;
    p.lower[b1 + 1] = box.beta2_lower;
    p.upper[b1 + 1] = box.beta2_upper;
  }
  return p;
}

NlpProblem assemble(const OcpSpec& spec, const Vec& x_now, double t_now) {
  return OcpProblem(spec, x_now, t_now).nlp();
}

double objective_average(const OcpSpec& spec, const Vec& z, const Vec& x_now, double t_now) {
  OcpSpec averaged = spec;
  averaged.average_cost = true;
  return OcpProblem(std::move(averaged), x_now, t_now).evaluate(z, false, false).objective;
}

}  // namespace vsmpc
