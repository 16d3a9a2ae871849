#include "vsmpc/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>

namespace vsmpc {

const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible_detected: return "infeasible_detected";
  }
  return "unknown";
}

double max_violation(const NlpProblem& problem, const Vec& z) {
  double viol = 0.0;
  if (problem.ineq) {
    const Vec g = problem.ineq(z);
    for (Eigen::Index i = 0; i < g.size(); ++i) viol = std::max(viol, g[i]);
  }
  if (problem.eq) {
    const Vec h = problem.eq(z);
    for (Eigen::Index i = 0; i < h.size(); ++i) viol = std::max(viol, std::abs(h[i]));
  }
  return viol;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kArmijo = 1e-4;
constexpr double kMaxPenalty = 1e8;
constexpr int kMaxBacktracks = 60;
constexpr double kMeritNoise = 1e-13;
constexpr double kApproxWolfe = 0.8;

struct NonFinite {
  Vec point;
};

// Evaluations of the user problem in original coordinates. Any exception or
// non-finite value surfaces as NonFinite carrying the point.
class Evaluator {
 public:
  Evaluator(const NlpProblem& p, double fd_step) : p_(p), fd_step_(fd_step) {}

  double objective(const Vec& z) const {
    const double f = guarded([&] { return p_.objective(z); }, z);
    if (!std::isfinite(f)) throw NonFinite{z};
    return f;
  }

  Vec gradient(const Vec& z) const {
    Vec g = guarded([&] {
      return p_.gradient ? p_.gradient(z) : finite_diff_gradient(p_.objective, z, fd_step_);
    }, z);
    if (!g.allFinite() || g.size() != z.size()) throw NonFinite{z};
    return g;
  }

  Vec ineq(const Vec& z) const { return rows(p_.ineq, z); }
  Vec eq(const Vec& z) const { return rows(p_.eq, z); }
  Mat ineq_jacobian(const Vec& z) const { return jacobian(p_.ineq, p_.ineq_jacobian, z); }
  Mat eq_jacobian(const Vec& z) const { return jacobian(p_.eq, p_.eq_jacobian, z); }

 private:
  template <typename F>
  static auto guarded(F&& f, const Vec& z) -> decltype(f()) {
    try {
      return f();
    } catch (const NonFinite&) {
      throw;
    } catch (...) {
      throw NonFinite{z};
    }
  }

  static Vec rows(const std::function<Vec(const Vec&)>& fun, const Vec& z) {
    if (!fun) return Vec(0);
    Vec v = guarded([&] { return fun(z); }, z);
    if (!v.allFinite()) throw NonFinite{z};
    return v;
  }

  Mat jacobian(const std::function<Vec(const Vec&)>& fun,
               const std::function<Mat(const Vec&)>& jac, const Vec& z) const {
    if (!fun) return Mat(0, z.size());
    Mat j = guarded([&] { return jac ? jac(z) : finite_diff_jacobian(fun, z, fd_step_); }, z);
    if (!j.allFinite()) throw NonFinite{z};
    return j;
  }

  const NlpProblem& p_;
  double fd_step_;
};

/**
 * PHR augmented Lagrangian over the free (non-pinned) coordinates, expressed
 * in box-normalized coordinates y = z / scale.
 */
class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const Evaluator& eval, Vec z_template, std::vector<int> free_idx, Vec scale)
      : eval_(eval), z_(std::move(z_template)), free_(std::move(free_idx)), scale_(std::move(scale)) {}

  Vec lambda;  // inequality multipliers, >= 0
  Vec mu;      // equality multipliers
  double rho = 10.0;

  Vec to_full(const Vec& y) const {
    Vec z = z_;
    for (std::size_t k = 0; k < free_.size(); ++k) z[free_[k]] = y[k] * scale_[k];
    return z;
  }

  Vec to_reduced(const Vec& z) const {
    Vec y(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) y[k] = z[free_[k]] / scale_[k];
    return y;
  }

  double value(const Vec& y) const {
    const Vec z = to_full(y);
    double val = eval_.objective(z);
    const Vec g = eval_.ineq(z);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      const double shifted = std::max(0.0, lambda[i] + rho * g[i]);
      val += (shifted * shifted - lambda[i] * lambda[i]) / (2.0 * rho);
    }
    const Vec h = eval_.eq(z);
    for (Eigen::Index i = 0; i < h.size(); ++i) val += mu[i] * h[i] + 0.5 * rho * h[i] * h[i];
    return val;
  }

  // Gradient with respect to y, given multiplier weights.
  Vec gradient(const Vec& y) const {
    const Vec z = to_full(y);
    Vec gz = eval_.gradient(z);
    const Vec g = eval_.ineq(z);
    if (g.size() > 0) {
      Vec w(g.size());
      for (Eigen::Index i = 0; i < g.size(); ++i) w[i] = std::max(0.0, lambda[i] + rho * g[i]);
      gz += eval_.ineq_jacobian(z).transpose() * w;
    }
    const Vec h = eval_.eq(z);
    if (h.size() > 0) gz += eval_.eq_jacobian(z).transpose() * (mu + rho * h);
    return reduce_gradient(gz);
  }

  // Lagrangian gradient (plain multipliers) with respect to y.
  Vec lagrangian_gradient(const Vec& z) const {
    Vec gz = eval_.gradient(z);
    if (lambda.size() > 0) gz += eval_.ineq_jacobian(z).transpose() * lambda;
    if (mu.size() > 0) gz += eval_.eq_jacobian(z).transpose() * mu;
    return reduce_gradient(gz);
  }

 private:
  Vec reduce_gradient(const Vec& gz) const {
    Vec gy(static_cast<Eigen::Index>(free_.size()));
    for (std::size_t k = 0; k < free_.size(); ++k) gy[k] = gz[free_[k]] * scale_[k];
    return gy;
  }

  const Evaluator& eval_;
  Vec z_;
  std::vector<int> free_;
  Vec scale_;
};

double projected_gradient_norm(const Vec& y, const Vec& g, const Vec& lo, const Vec& hi) {
  double norm = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double step = std::clamp(y[i] - g[i], lo[i], hi[i]) - y[i];
    norm = std::max(norm, std::abs(step));
  }
  return norm;
}

Vec project(const Vec& y, const Vec& lo, const Vec& hi) {
  return y.cwiseMax(lo).cwiseMin(hi);
}

struct InnerOutcome {
  Vec y;
  int iterations = 0;
  double merit_start = 0.0;
  double merit_end = 0.0;
};

/// Projected BFGS on the box [lo, hi] with an active-set reduced Newton step
/// and Armijo backtracking along the projection arc. B is kept across calls.
InnerOutcome minimize_in_box(const AugmentedLagrangian& al, Vec y, const Vec& lo, const Vec& hi,
                             Mat& hessian, double tol, int max_iter) {
  const Eigen::Index n = y.size();
  InnerOutcome out;
  double val = al.value(y);
  Vec grad = al.gradient(y);
  out.merit_start = val;
  bool fresh = true;  // hessian is a multiple of identity
  for (int it = 0; it < max_iter; ++it) {
    if (projected_gradient_norm(y, grad, lo, hi) <= tol) break;

    std::vector<int> free_idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = y[i] <= lo[i] && grad[i] > 0.0;
      const bool at_hi = y[i] >= hi[i] && grad[i] < 0.0;
      if (!at_lo && !at_hi) free_idx.push_back(static_cast<int>(i));
    }
    Vec dir = Vec::Zero(n);
    if (!free_idx.empty()) {
      const auto nf = static_cast<Eigen::Index>(free_idx.size());
      Mat bff(nf, nf);
      Vec gf(nf);
      for (Eigen::Index a = 0; a < nf; ++a) {
        gf[a] = grad[free_idx[a]];
        for (Eigen::Index b = 0; b < nf; ++b) bff(a, b) = hessian(free_idx[a], free_idx[b]);
      }
      Eigen::LDLT<Mat> ldlt(bff);
      Vec df = ldlt.solve(-gf);
      if (ldlt.info() != Eigen::Success || !df.allFinite() || df.dot(gf) >= 0.0) {
        hessian.setIdentity();
        fresh = true;
        df = -gf;
      }
      for (Eigen::Index a = 0; a < nf; ++a) dir[free_idx[a]] = df[a];
    } else {
      dir = -grad;
    }

    double alpha = 1.0;
    if (fresh) {
      const double dmax = dir.lpNorm<Eigen::Infinity>();
      if (dmax > 0.1) alpha = 0.1 / dmax;
    }
    bool accepted = false;
    Vec y_new;
    double val_new = val;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      y_new = project(y + alpha * dir, lo, hi);
      const double decrease = grad.dot(y_new - y);
      if ((y_new - y).lpNorm<Eigen::Infinity>() == 0.0) break;
      bool finite = true;
      try {
        val_new = al.value(y_new);
      } catch (const NonFinite&) {
        finite = false;
      }
      if (finite && val_new <= val + kArmijo * decrease) {
        accepted = true;
        break;
      }
      // Once the decrease is below round-off in the merit value, accept on the
      // approximate Wolfe test of the directional derivative instead.
      if (finite && val_new <= val + kMeritNoise * std::abs(val)) {
        const Vec g_try = al.gradient(y_new);
        if (g_try.dot(y_new - y) <= kApproxWolfe * std::abs(decrease)) {
          accepted = true;
          break;
        }
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (fresh) break;  // steepest descent made no progress: stalled
      hessian.setIdentity();
      fresh = true;
      continue;
    }

    const Vec grad_new = al.gradient(y_new);
    const Vec s = y_new - y;
    const Vec yv = grad_new - grad;
    if (fresh) {
      // Shanno-Phua scaling of the initial identity.
      const double sy = s.dot(yv);
      const double yy = yv.dot(yv);
      if (sy > 0.0 && yy > 0.0) hessian *= yy / sy;
      fresh = false;
    }
    const Vec bs = hessian * s;
    const double sbs = s.dot(bs);
    const double sy = s.dot(yv);
    if (sbs > 0.0) {
      Vec r = yv;
      if (sy < 0.2 * sbs) {
        const double theta = 0.8 * sbs / (sbs - sy);
        r = theta * yv + (1.0 - theta) * bs;
      }
      const double sr = s.dot(r);
      if (sr > 0.0) hessian += r * r.transpose() / sr - bs * bs.transpose() / sbs;
    }

    const bool stalled = std::abs(val - val_new) <= 1e-16 * std::max(1.0, std::abs(val));
    y = y_new;
    val = val_new;
    grad = grad_new;
    out.iterations = it + 1;
    if (stalled && projected_gradient_norm(y, grad, lo, hi) <= 10.0 * tol) break;
  }
  out.y = y;
  out.merit_end = val;
  return out;
}

}  // namespace

SolveResult solve(const NlpProblem& problem, const Vec& z0, const SolveOptions& opts) {
  SolveResult result;
  const int dim = problem.dim;
  Vec lower = problem.lower.size() == dim ? problem.lower : Vec::Constant(dim, -kInf);
  Vec upper = problem.upper.size() == dim ? problem.upper : Vec::Constant(dim, kInf);
  Vec z = z0.size() == dim ? Vec(z0.cwiseMax(lower).cwiseMin(upper)) : Vec(Vec::Zero(dim).cwiseMax(lower).cwiseMin(upper));
  for (Eigen::Index i = 0; i < dim; ++i) {
    if (!std::isfinite(z[i])) z[i] = std::isfinite(lower[i]) ? lower[i] : (std::isfinite(upper[i]) ? upper[i] : 0.0);
  }

  std::vector<int> free_idx;
  std::vector<double> scale_vals;
  for (int i = 0; i < dim; ++i) {
    if (lower[i] == upper[i]) continue;
    free_idx.push_back(i);
    const double range = upper[i] - lower[i];
    scale_vals.push_back(std::isfinite(range) ? range : 1.0);
  }
  const auto nf = static_cast<Eigen::Index>(free_idx.size());
  Vec scale(nf), lo(nf), hi(nf);
  for (Eigen::Index k = 0; k < nf; ++k) {
    scale[k] = scale_vals[k];
    lo[k] = lower[free_idx[k]] / scale[k];
    hi[k] = upper[free_idx[k]] / scale[k];
  }

  Evaluator eval(problem, opts.fd_step);
  AugmentedLagrangian al(eval, z, free_idx, scale);
  al.rho = opts.initial_penalty;

  try {
    const Eigen::Index n_ineq = eval.ineq(z).size();
    const Eigen::Index n_eq = eval.eq(z).size();
    al.lambda = Vec::Zero(n_ineq);
    al.mu = Vec::Zero(n_eq);

    Mat hessian = Mat::Identity(nf, nf);
    Vec y = al.to_reduced(z);
    double prev_violation = kInf;
    const double inner_tol = 0.1 * opts.tol_stat;
    for (int outer = 0; outer < opts.max_outer; ++outer) {
      const InnerOutcome inner = minimize_in_box(al, y, lo, hi, hessian, inner_tol, opts.max_inner);
      y = inner.y;
      z = al.to_full(y);
      result.iterations += inner.iterations;
      result.outer_iterations = outer + 1;

      const Vec g = eval.ineq(z);
      const Vec h = eval.eq(z);
      double violation = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i) violation = std::max(violation, g[i]);
      for (Eigen::Index i = 0; i < h.size(); ++i) violation = std::max(violation, std::abs(h[i]));
      for (Eigen::Index i = 0; i < g.size(); ++i) al.lambda[i] = std::max(0.0, al.lambda[i] + al.rho * g[i]);
      al.mu += al.rho * h;

      const double stationarity = projected_gradient_norm(y, al.lagrangian_gradient(z), lo, hi);
      result.max_violation = violation;
      result.stationarity = stationarity;
      if (opts.trace) {
        opts.trace({outer, inner.iterations, inner.merit_start, inner.merit_end, violation,
                    stationarity, al.rho});
      }
      if (violation <= opts.tol_feas && stationarity <= opts.tol_stat) {
        result.status = SolveStatus::converged;
        break;
      }
      if (violation > 0.25 * prev_violation && violation > opts.tol_feas) {
        const double grown = std::min(al.rho * 10.0, kMaxPenalty);
        if (grown != al.rho) {
          al.rho = grown;
          hessian.setIdentity();
        }
      }
      prev_violation = violation;
    }
    result.z_opt = z;
    result.f_opt = eval.objective(z);
    if (result.status != SolveStatus::converged) {
      result.status = SolveStatus::max_iter;
      result.message = "outer iteration cap reached";
    }
  } catch (const NonFinite& bad) {
    result.status = SolveStatus::infeasible_detected;
    result.bad_point = bad.point;
    result.z_opt = z;
    result.f_opt = std::numeric_limits<double>::quiet_NaN();
    result.message = "non-finite evaluation";
  }
  return result;
}

}  // namespace vsmpc
