#include "mlcf/models.hpp"

#include <algorithm>
#include <cmath>

namespace mlcf {

Eigen::VectorXd thomas_solve(const TridiagonalSystem& sys) {
  const Eigen::Index n = sys.diag.size();
  if (sys.lower.size() != n || sys.upper.size() != n || sys.rhs.size() != n) {
    throw DimensionError("thomas_solve: inconsistent band lengths");
  }
  Eigen::VectorXd c(n), d(n), x(n);
  double denom = sys.diag[0];
  if (denom == 0.0) throw EvaluationError("thomas_solve: zero pivot");
  c[0] = sys.upper[0] / denom;
  d[0] = sys.rhs[0] / denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = sys.diag[i] - sys.lower[i] * c[i - 1];
    if (denom == 0.0) throw EvaluationError("thomas_solve: zero pivot");
    c[i] = sys.upper[i] / denom;
    d[i] = (sys.rhs[i] - sys.lower[i] * d[i - 1]) / denom;
  }
  x[n - 1] = d[n - 1];
  for (Eigen::Index i = n - 2; i >= 0; --i) x[i] = d[i] - c[i] * x[i + 1];
  return x;
}

std::size_t bvp_cells(double h) {
  if (!(h > 0.0)) throw std::invalid_argument("bvp: step must be positive");
  const double cells = 1.0 / h;
  const double rounded = std::round(cells);
  if (rounded < 2.0 || std::abs(cells - rounded) > 1e-9 * rounded) {
    throw std::invalid_argument("bvp: 1/h must be an integer >= 2 (h = " + std::to_string(h) + ")");
  }
  return static_cast<std::size_t>(rounded);
}

TridiagonalSystem bvp_system(double x1, double x2, double h) {
  const std::size_t cells = bvp_cells(h);
  const double step = 1.0 / static_cast<double>(cells);
  // c(z) = 1 + x1 z is linear, so its minimum over the grid is at an endpoint.
  if (!(1.0 + x1 > 0.0)) {
    throw DegenerateCoefficientError("bvp: coefficient 1 + x1 z is not positive on [0,1] (x1 = " +
                                     std::to_string(x1) + ")");
  }
  const auto n = static_cast<Eigen::Index>(cells - 1);
  TridiagonalSystem sys{Eigen::VectorXd::Zero(n), Eigen::VectorXd(n), Eigen::VectorXd::Zero(n),
                        Eigen::VectorXd::Constant(n, -kBvpForcingScale * kBvpForcingScale * x2 * x2 * step * step)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = static_cast<double>(i + 1) * step;
    const double c_minus = 1.0 + x1 * (z - 0.5 * step);
    const double c_plus = 1.0 + x1 * (z + 0.5 * step);
    sys.diag[i] = -(c_minus + c_plus);
    if (i > 0) sys.lower[i] = c_minus;
    if (i + 1 < n) sys.upper[i] = c_plus;
  }
  return sys;
}

Eigen::VectorXd bvp_solve(double x1, double x2, double h) {
  const std::size_t cells = bvp_cells(h);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells));
  if (!std::isfinite(x1) || !std::isfinite(x2)) throw EvaluationError("bvp: non-finite input");
  const auto sys = bvp_system(x1, x2, h);
  if (cells > 1) u.head(static_cast<Eigen::Index>(cells - 1)) = thomas_solve(sys);
  return u;
}

double bvp_integrand(const Point& x, double h) {
  if (x.size() != 2) throw DimensionError("bvp_integrand: expected a 2-dimensional point");
  const auto u = bvp_solve(x[0], x[1], h);
  return u.sum() / static_cast<double>(u.size());
}

GaussianSpec bvp_input_spec(double x1_scale, bool scale_is_variance) {
  if (!(x1_scale > 0.0)) throw std::invalid_argument("bvp_input_spec: scale must be positive");
  GaussianSpec spec{Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(scale_is_variance ? std::sqrt(x1_scale) : x1_scale, 1.0)};
  return spec;
}

void gauss_hermite(std::size_t n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k < n; ++k) {
    const double b = std::sqrt(static_cast<double>(k) / 2.0);
    jacobi(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k)) = b;
    jacobi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k - 1)) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  nodes = eig.eigenvalues();
  weights = std::sqrt(M_PI) * eig.eigenvectors().row(0).transpose().array().square();
}

namespace {

struct Quadrature {
  double value = 0.0;
  double excluded_bound = 0.0;
};

// Tensor rule; x1 nodes where the coefficient degenerates are skipped and
// bounded by their weight times the largest inner (x2) sum.
Quadrature bvp_quadrature(const GaussianSpec& spec, std::size_t nodes, double h) {
  Eigen::VectorXd t, w;
  gauss_hermite(nodes, t, w);
  w /= std::sqrt(M_PI);
  Quadrature q;
  double excluded_weight = 0.0, max_inner = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double x1 = spec.mean[0] + std::sqrt(2.0) * spec.sd[0] * t[i];
    if (!(1.0 + x1 > 0.0)) {
      excluded_weight += w[i];
      continue;
    }
    double inner = 0.0;
    for (Eigen::Index j = 0; j < t.size(); ++j) {
      const double x2 = spec.mean[1] + std::sqrt(2.0) * spec.sd[1] * t[j];
      inner += w[j] * bvp_integrand(Eigen::Vector2d(x1, x2), h);
    }
    max_inner = std::max(max_inner, std::abs(inner));
    q.value += w[i] * inner;
  }
  q.excluded_bound = excluded_weight * max_inner;
  return q;
}

}  // namespace

TruthOracle bvp_truth(const GaussianSpec& spec, const BvpTruthOptions& opts) {
  spec.validate();
  if (spec.dim() != 2) throw DimensionError("bvp_truth: spec must be 2-dimensional");
  const auto base = bvp_quadrature(spec, opts.nodes, opts.step);
  const auto refined = bvp_quadrature(spec, 2 * opts.nodes, opts.step);
  TruthOracle oracle;
  oracle.method = "gauss-hermite " + std::to_string(opts.nodes) + "x" + std::to_string(opts.nodes) + ", h=1/" +
                  std::to_string(bvp_cells(opts.step));
  oracle.value = base.value;
  oracle.error = std::abs(refined.value - base.value) + std::max(base.excluded_bound, refined.excluded_bound);
  if (opts.continuum) {
    const auto half = bvp_quadrature(spec, opts.nodes, opts.step / 2.0);
    // second-order scheme: |Q(h) - Q(0)| ~ 4/3 |Q(h) - Q(h/2)|
    oracle.error += 4.0 / 3.0 * std::abs(base.value - half.value);
  }
  return oracle;
}

}  // namespace mlcf
