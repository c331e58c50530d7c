#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bullseye/error.hpp"

namespace bullseye::fit {

using ResidualFn = std::function<void(std::span<const double> params, std::span<double> residuals)>;
/// Fills the (num_residuals x num_params) Jacobian of the residuals.
using JacobianFn = std::function<void(std::span<const double> params, Eigen::MatrixXd& jac)>;

struct Problem {
  std::size_t num_residuals = 0;
  ResidualFn residual;
  JacobianFn jacobian;  ///< optional; central differences when empty
};

/// Box constraints; an empty vector means unbounded on that side.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;
};

struct Options {
  int max_iterations = 500;
  double gtol = 1e-10;  ///< max cosine between residual and any Jacobian column
  double xtol = 1e-13;  ///< relative step size
  double ftol = 1e-15;  ///< relative cost reduction
  double initial_damping = 1e-3;
  bool compute_covariance = true;
};

struct Result {
  std::vector<double> params;
  Eigen::MatrixXd covariance;  ///< reduced-chi-square scaled inverse of J^T J
  double cost = 0.0;           ///< 0.5 * |r|^2
  int iterations = 0;
  int evaluations = 0;
  double gradient_cosine = 0.0;
  std::string stop_reason;

  double sigma(std::size_t k) const;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, std::vector<double> best, double cost)
      : Error(ErrorKind::NoConvergence, what), best_(std::move(best)), cost_(cost) {}
  const std::vector<double>& best() const { return best_; }
  double cost() const { return cost_; }

 private:
  std::vector<double> best_;
  double cost_;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling and bound projection.
Result nlls_minimize(const Problem& problem, std::vector<double> initial, const Bounds& bounds = {},
                     const Options& options = {});

/// Central-difference Jacobian (Richardson-extrapolated), also used to audit
/// analytic Jacobians.
void numeric_jacobian(const Problem& problem, std::span<const double> params, Eigen::MatrixXd& jac,
                      double rel_step = 1e-4);

/// sigma^2 (J^T J)^{-1} with sigma^2 = |r|^2 / (m - n). Throws SingularNormalMatrix.
Eigen::MatrixXd covariance_from_jacobian(const Eigen::MatrixXd& jac, double cost);

}  // namespace bullseye::fit
