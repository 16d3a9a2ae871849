#include "vsmpc/numdiff.hpp"

#include <algorithm>
#include <cmath>

namespace vsmpc {

Vec finite_diff_gradient(const std::function<double(const Vec&)>& fun, const Vec& z,
                         double h_rel) {
  Vec grad(z.size());
  Vec probe = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = h_rel * std::max(1.0, std::abs(z[i]));
    probe[i] = z[i] + h;
    const double up = fun(probe);
    probe[i] = z[i] - h;
    const double down = fun(probe);
    probe[i] = z[i];
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteEvaluation(static_cast<int>(i), "non-finite function value while "
                                "differencing coordinate " + std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& fun, const Vec& z,
                         double h_rel) {
  Mat jac;
  Vec probe = z;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double h = h_rel * std::max(1.0, std::abs(z[i]));
    probe[i] = z[i] + h;
    const Vec up = fun(probe);
    probe[i] = z[i] - h;
    const Vec down = fun(probe);
    probe[i] = z[i];
    if (!up.allFinite() || !down.allFinite()) {
      throw NonFiniteEvaluation(static_cast<int>(i), "non-finite function value while "
                                "differencing coordinate " + std::to_string(i));
    }
    if (i == 0) jac.resize(up.size(), z.size());
    jac.col(i) = (up - down) / (2.0 * h);
  }
  if (z.size() == 0) jac.resize(fun(z).size(), 0);
  return jac;
}

}  // namespace vsmpc
