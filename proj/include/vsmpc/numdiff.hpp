#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace vsmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kDefaultFdStep = 1e-6;

class NonFiniteEvaluation : public std::runtime_error {
 public:
  NonFiniteEvaluation(int coordinate, const std::string& what)
      : std::runtime_error(what), coordinate_(coordinate) {}
  int coordinate() const { return coordinate_; }

 private:
  int coordinate_;
};

// Central differences with per-coordinate step h_rel * max(1, |z_i|).
Vec finite_diff_gradient(const std::function<double(const Vec&)>& fun, const Vec& z,
                         double h_rel = kDefaultFdStep);

// Rows follow fun's output, columns follow z.
Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& fun, const Vec& z,
                         double h_rel = kDefaultFdStep);

}  // namespace vsmpc
