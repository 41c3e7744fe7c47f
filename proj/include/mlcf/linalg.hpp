#pragma once

#include <Eigen/Dense>

namespace mlcf {

struct RegularizedSolve {
  Eigen::MatrixXd solution;
  double jitter = 0.0;     // final absolute diagonal shift
  int escalations = 0;     // how many times the shift was multiplied by 10
  double condition = 0.0;  // reciprocal of the Cholesky 1-norm rcond estimate
};

/// Solves (G + lambda I) z = rhs with lambda = jitter_scale * mean(diag G).
///
/// Uses a Cholesky factorization. When it fails, lambda is multiplied by 10
/// (or seeded at 1e-12 * mean(diag G) if it was zero) at most `max_escalations`
/// times before SingularGramError is thrown.
RegularizedSolve solve_regularized(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double jitter_scale,
                                   int max_escalations = 4);

}  // namespace mlcf
