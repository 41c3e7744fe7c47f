#pragma once

#include "mlcf/types.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace mlcf {

/// Squared-exponential kernel sigma^2 exp(-|x-y|^2 / (2 l^2)) with analytic derivatives.
class SqExpKernel {
 public:
  explicit SqExpKernel(double lengthscale = 1.0, double amplitude = 1.0);

  double lengthscale() const { return lengthscale_; }
  double amplitude() const { return amplitude_; }

  double operator()(const Point& x, const Point& y) const;

  /// Gradient with respect to the first argument.
  Eigen::VectorXd grad_x(const Point& x, const Point& y) const;
  /// Gradient with respect to the second argument.
  Eigen::VectorXd grad_y(const Point& x, const Point& y) const;
  /// Mixed term sum_i d^2 k / dx_i dy_i.
  double div_grad(const Point& x, const Point& y) const;

 private:
  double lengthscale_;
  double amplitude_;
};

/// Target distribution known through its score (gradient of the log-density).
///
/// The density may be unnormalised. `log_density` is only needed by the MCMC
/// sampler; `log_density_and_score` lets expensive models share work between
/// the two.
struct TargetDensity {
  using ScoreFn = std::function<Eigen::VectorXd(const Point&)>;
  using LogDensityFn = std::function<double(const Point&)>;
  using JointFn = std::function<std::pair<double, Eigen::VectorXd>(const Point&)>;

  int dim = 0;
  ScoreFn score;
  LogDensityFn log_density;
  JointFn log_density_and_score;

  /// Score at x, checked for length and finiteness.
  Eigen::VectorXd score_at(const Point& x) const;
  bool has_log_density() const { return static_cast<bool>(log_density) || static_cast<bool>(log_density_and_score); }
  double log_density_at(const Point& x) const;
  std::pair<double, Eigen::VectorXd> log_density_and_score_at(const Point& x) const;
};

/// Independent Gaussian N(mean_i, sd_i^2) in every coordinate.
TargetDensity diagonal_gaussian_target(const Eigen::VectorXd& mean, const Eigen::VectorXd& sd);

/// Target given only by a log-density; the score falls back to central
/// differences with step 1e-6 (1 + |x_i|).
TargetDensity target_from_log_density(int dim, TargetDensity::LogDensityFn log_density);

/// Langevin-Stein kernel k0 built from a base kernel and a target score.
class SteinKernel {
 public:
  SteinKernel(SqExpKernel base, TargetDensity target);

  const SqExpKernel& base() const { return base_; }
  const TargetDensity& target() const { return target_; }

  double operator()(const Point& x, const Point& y) const;

  /// k0 from precomputed scores sx = grad log pi(x), sy = grad log pi(y).
  double eval_with_scores(const Point& x, const Eigen::VectorXd& sx, const Point& y,
                          const Eigen::VectorXd& sy) const;

  Eigen::MatrixXd gram(const PointSet& x) const;
  Eigen::MatrixXd gram(const PointSet& x, const std::vector<Eigen::VectorXd>& scores) const;

  /// Rows indexed by x1, columns by x0.
  Eigen::MatrixXd cross(const PointSet& x1, const PointSet& x0) const;
  Eigen::MatrixXd cross(const PointSet& x1, const std::vector<Eigen::VectorXd>& s1, const PointSet& x0,
                        const std::vector<Eigen::VectorXd>& s0) const;

  std::vector<Eigen::VectorXd> scores(const PointSet& x) const;

 private:
  void check_point(const Point& x) const;

  SqExpKernel base_;
  TargetDensity target_;
};

/// Median of pairwise Euclidean distances; 1.0 when fewer than two distinct points.
double median_heuristic(const PointSet& x);

struct KernelPolicy {
  std::optional<double> lengthscale;  // median heuristic when unset
  double amplitude = 1.0;
};

/// Stein kernel for one level, fitting the lengthscale on `fit_points` unless fixed.
SteinKernel make_level_kernel(const TargetDensity& target, const PointSet& fit_points, const KernelPolicy& policy);

}  // namespace mlcf
