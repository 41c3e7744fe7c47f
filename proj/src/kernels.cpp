#include "mlcf/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mlcf {

std::string format_point(const Point& x) {
  std::ostringstream os;
  os.precision(10);
  os << "(";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) os << ", ";
    os << x[i];
  }
  os << ")";
  return os.str();
}

SqExpKernel::SqExpKernel(double lengthscale, double amplitude) : lengthscale_(lengthscale), amplitude_(amplitude) {
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw std::invalid_argument("SqExpKernel: lengthscale must be positive and finite");
  }
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw std::invalid_argument("SqExpKernel: amplitude must be positive and finite");
  }
}

double SqExpKernel::operator()(const Point& x, const Point& y) const {
  require_same_dim(x, y, "se_eval");
  const double l2 = lengthscale_ * lengthscale_;
  return amplitude_ * std::exp(-(x - y).squaredNorm() / (2.0 * l2));
}

Eigen::VectorXd SqExpKernel::grad_x(const Point& x, const Point& y) const {
  const double k = (*this)(x, y);
  return -(x - y) * (k / (lengthscale_ * lengthscale_));
}

Eigen::VectorXd SqExpKernel::grad_y(const Point& x, const Point& y) const {
  const double k = (*this)(x, y);
  return (x - y) * (k / (lengthscale_ * lengthscale_));
}

double SqExpKernel::div_grad(const Point& x, const Point& y) const {
  const double k = (*this)(x, y);
  const double l2 = lengthscale_ * lengthscale_;
  const double r2 = (x - y).squaredNorm();
  return (static_cast<double>(x.size()) / l2 - r2 / (l2 * l2)) * k;
}

Eigen::VectorXd TargetDensity::score_at(const Point& x) const {
  if (x.size() != dim) {
    throw DimensionError("TargetDensity: point has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(dim));
  }
  Eigen::VectorXd s = score ? score(x) : log_density_and_score(x).second;
  if (s.size() != dim) {
    throw DimensionError("TargetDensity: score returned length " + std::to_string(s.size()));
  }
  if (!s.allFinite()) {
    throw EvaluationError("non-finite score at point " + format_point(x));
  }
  return s;
}

double TargetDensity::log_density_at(const Point& x) const {
  if (log_density) return log_density(x);
  if (log_density_and_score) return log_density_and_score(x).first;
  throw std::logic_error("TargetDensity: no log-density available");
}

std::pair<double, Eigen::VectorXd> TargetDensity::log_density_and_score_at(const Point& x) const {
  if (log_density_and_score) return log_density_and_score(x);
  const double lp = log_density_at(x);
  if (!std::isfinite(lp)) return {lp, Eigen::VectorXd()};
  return {lp, score_at(x)};
}

TargetDensity diagonal_gaussian_target(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  if (mean.size() != sd.size()) throw DimensionError("diagonal_gaussian_target: mean/sd length mismatch");
  if ((sd.array() <= 0.0).any()) throw std::invalid_argument("diagonal_gaussian_target: sd must be positive");
  const Eigen::ArrayXd prec = sd.array().square().inverse();
  TargetDensity t;
  t.dim = static_cast<int>(mean.size());
  t.score = [mean, prec](const Point& x) -> Eigen::VectorXd { return -((x - mean).array() * prec).matrix(); };
  t.log_density = [mean, prec](const Point& x) { return -0.5 * ((x - mean).array().square() * prec).sum(); };
  return t;
}

TargetDensity target_from_log_density(int dim, TargetDensity::LogDensityFn log_density) {
  TargetDensity t;
  t.dim = dim;
  t.log_density = log_density;
  t.score = [log_density](const Point& x) {
    Eigen::VectorXd g(x.size());
    Point xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double h = 1e-6 * (1.0 + std::abs(x[i]));
      xp[i] = x[i] + h;
      const double up = log_density(xp);
      xp[i] = x[i] - h;
      const double dn = log_density(xp);
      xp[i] = x[i];
      g[i] = (up - dn) / (2.0 * h);
    }
    return g;
  };
  return t;
}

SteinKernel::SteinKernel(SqExpKernel base, TargetDensity target) : base_(base), target_(std::move(target)) {
  if (target_.dim <= 0) throw std::invalid_argument("SteinKernel: target dimension must be positive");
  if (!target_.score && !target_.log_density_and_score) {
    throw std::invalid_argument("SteinKernel: target has no score");
  }
}

void SteinKernel::check_point(const Point& x) const {
  if (x.size() != target_.dim) {
    throw DimensionError("SteinKernel: point dimension " + std::to_string(x.size()) + " != target dimension " +
                         std::to_string(target_.dim));
  }
}

double SteinKernel::eval_with_scores(const Point& x, const Eigen::VectorXd& sx, const Point& y,
                                     const Eigen::VectorXd& sy) const {
  // k0 = k [ d/l^2 - |r|^2/l^4 + (sx - sy).r / l^2 + sx.sy ],  r = x - y
  const double l2 = base_.lengthscale() * base_.lengthscale();
  const Eigen::VectorXd r = x - y;
  const double r2 = r.squaredNorm();
  const double k = base_.amplitude() * std::exp(-r2 / (2.0 * l2));
  const double d = static_cast<double>(x.size());
  return k * (d / l2 - r2 / (l2 * l2) + (sx - sy).dot(r) / l2 + sx.dot(sy));
}

double SteinKernel::operator()(const Point& x, const Point& y) const {
  check_point(x);
  check_point(y);
  return eval_with_scores(x, target_.score_at(x), y, target_.score_at(y));
}

std::vector<Eigen::VectorXd> SteinKernel::scores(const PointSet& x) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(x.size());
  for (const auto& p : x) {
    check_point(p);
    out.push_back(target_.score_at(p));
  }
  return out;
}

Eigen::MatrixXd SteinKernel::gram(const PointSet& x) const { return gram(x, scores(x)); }

Eigen::MatrixXd SteinKernel::gram(const PointSet& x, const std::vector<Eigen::VectorXd>& s) const {
  if (x.empty()) throw std::invalid_argument("stein_gram: empty point set");
  if (s.size() != x.size()) throw DimensionError("stein_gram: score count does not match point count");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    check_point(x[i]);
    for (Eigen::Index j = 0; j <= i; ++j) {
      g(i, j) = eval_with_scores(x[i], s[i], x[j], s[j]);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

Eigen::MatrixXd SteinKernel::cross(const PointSet& x1, const PointSet& x0) const {
  return cross(x1, scores(x1), x0, scores(x0));
}

Eigen::MatrixXd SteinKernel::cross(const PointSet& x1, const std::vector<Eigen::VectorXd>& s1, const PointSet& x0,
                                   const std::vector<Eigen::VectorXd>& s0) const {
  if (x1.empty() || x0.empty()) throw std::invalid_argument("stein_cross: empty point set");
  if (s1.size() != x1.size() || s0.size() != x0.size()) {
    throw DimensionError("stein_cross: score count does not match point count");
  }
  Eigen::MatrixXd c(x1.size(), x0.size());
  for (std::size_t i = 0; i < x1.size(); ++i) {
    check_point(x1[i]);
    for (std::size_t j = 0; j < x0.size(); ++j) {
      c(i, j) = eval_with_scores(x1[i], s1[i], x0[j], s0[j]);
    }
  }
  return c;
}

double median_heuristic(const PointSet& x) {
  std::vector<double> dist;
  dist.reserve(x.size() * (x.size() - (x.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double r = (x[i] - x[j]).norm();
      if (r > 0.0) dist.push_back(r);
    }
  }
  if (dist.empty()) return 1.0;
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (dist.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(dist.begin(), mid);
  return 0.5 * (lower + upper);
}

SteinKernel make_level_kernel(const TargetDensity& target, const PointSet& fit_points, const KernelPolicy& policy) {
  const double ell = policy.lengthscale ? *policy.lengthscale : median_heuristic(fit_points);
  return SteinKernel(SqExpKernel(ell, policy.amplitude), target);
}

}  // namespace mlcf
