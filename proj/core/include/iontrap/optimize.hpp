#pragma once

#include <functional>

#include <Eigen/Core>

namespace iontrap::optimize {

struct NelderMeadOptions {
  int max_evaluations = 4000;
  /// Stop when the spread of simplex values falls below
  /// f_abs_tol + f_rel_tol * |f_best| and the simplex diameter below x_tol.
  double f_abs_tol = 1e-14;
  double f_rel_tol = 1e-12;
  double x_tol = 1e-10;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free downhill simplex (standard coefficients 1, 2, 1/2, 1/2).
/// The initial simplex is x0 plus `step[i]` along each axis. Non-finite
/// objective values are treated as +infinity.
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                             const NelderMeadOptions& options = {});

}  // namespace iontrap::optimize
