#include "mlcf/linalg.hpp"

#include "mlcf/types.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace mlcf {

RegularizedSolve solve_regularized(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs, double jitter_scale,
                                   int max_escalations) {
  if (gram.rows() != gram.cols()) throw DimensionError("solve_regularized: gram is not square");
  if (rhs.rows() != gram.rows()) throw DimensionError("solve_regularized: rhs row count mismatch");
  if (gram.rows() == 0) throw DimensionError("solve_regularized: empty gram");
  if (!(jitter_scale >= 0.0)) throw std::invalid_argument("solve_regularized: negative jitter scale");
  if (!gram.allFinite()) throw SingularGramError("solve_regularized: gram has non-finite entries");

  const double mean_diag = gram.diagonal().mean();
  const double scale = std::abs(mean_diag) > 0.0 ? std::abs(mean_diag) : 1.0;
  double lambda = jitter_scale * scale;

  for (int attempt = 0; attempt <= max_escalations; ++attempt) {
    if (attempt > 0) lambda = lambda > 0.0 ? 10.0 * lambda : 1e-12 * scale;
    Eigen::MatrixXd shifted = gram;
    shifted.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    RegularizedSolve out;
    out.solution = llt.solve(rhs);
    if (!out.solution.allFinite()) continue;
    out.jitter = lambda;
    out.escalations = attempt;
    const double rcond = llt.rcond();
    out.condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    return out;
  }
  throw SingularGramError("gram matrix (" + std::to_string(gram.rows()) +
                          "x" + std::to_string(gram.cols()) + ") is not positive definite at jitter " +
                          std::to_string(lambda));
}

}  // namespace mlcf
