#pragma once

#include "mlcf/kernels.hpp"
#include "mlcf/linalg.hpp"
#include "mlcf/types.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mlcf {

struct SolveOptions {
  double jitter_scale = 1e-8;
  int max_escalations = 4;
};

/// Fitting set X0 (size m) and evaluation set X1 (size n - m) of the standard CF estimator.
struct SampleSplit {
  PointSet x0;
  PointSet x1;
};

/// Default fitting-set size ceil(n/2).
std::size_t default_fit_size(std::size_t n);

/// First m points become X0, the rest X1.
SampleSplit split_points(const PointSet& points, std::size_t m);

/// Result of one control-functional fit.
struct CfFit {
  double estimate = 0.0;
  double offset = 0.0;  // beta-hat = 1'G^-1 y / 1'G^-1 1
  double condition = 0.0;
  double jitter = 0.0;
};

double mc_estimate(std::span<const double> values);

/// Standard CF estimator on precomputed values; scores may be empty (computed on demand).
CfFit cf_standard(const SteinKernel& kernel, const PointSet& x0, const Eigen::VectorXd& y0, const PointSet& x1,
                  const Eigen::VectorXd& y1, const SolveOptions& opts = {},
                  const std::vector<Eigen::VectorXd>& s0 = {}, const std::vector<Eigen::VectorXd>& s1 = {});

double cf_standard(const SteinKernel& kernel, const Integrand& f, const SampleSplit& split,
                   const SolveOptions& opts = {});

/// Simplified CF estimator 1'G^-1 y / 1'G^-1 1 over all points.
CfFit cf_simplified(const SteinKernel& kernel, const PointSet& x, const Eigen::VectorXd& y,
                    const SolveOptions& opts = {}, const std::vector<Eigen::VectorXd>& scores = {});

double cf_simplified(const SteinKernel& kernel, const Integrand& f, const PointSet& x, const SolveOptions& opts = {});

/// Integrands f_0..f_L of increasing fidelity and per-sample cost. f_{-1} is zero.
class LevelHierarchy {
 public:
  struct Level {
    Integrand f;
    double cost = 0.0;  // seconds per sample at this level
  };

  explicit LevelHierarchy(std::vector<Level> levels);

  std::size_t size() const { return levels_.size(); }
  std::size_t finest() const { return levels_.size() - 1; }
  const Level& level(std::size_t l) const { return levels_.at(l); }
  std::vector<double> costs() const;

  /// f_l(x) - f_{l-1}(x).
  double increment(std::size_t l, const Point& x) const;
  Eigen::VectorXd increments(std::size_t l, const PointSet& x) const;

 private:
  std::vector<Level> levels_;
};

struct LevelReport {
  std::size_t level = 0;
  double contribution = 0.0;
  double offset = std::numeric_limits<double>::quiet_NaN();  // a_l; NaN for plain MLMC
  double condition = std::numeric_limits<double>::quiet_NaN();
  double jitter = std::numeric_limits<double>::quiet_NaN();
  double lengthscale = std::numeric_limits<double>::quiet_NaN();
  std::size_t m = 0;  // fitting points (0 for MLMC, n for simplified)
  std::size_t n = 0;
  double cost = 0.0;
};

struct EstimateReport {
  double estimate = 0.0;
  std::vector<LevelReport> per_level;
  double total_cost = 0.0;
};

/// Evaluated data at one level: points, increment values and, optionally, cached scores.
struct LevelData {
  PointSet points;
  Eigen::VectorXd values;
  std::vector<Eigen::VectorXd> scores;
  std::size_t fit_size = 0;  // m for the standard estimator (first m points fit)
  double cost = 0.0;         // cost per sample
};

EstimateReport mlmc_estimate(const std::vector<LevelData>& levels);
EstimateReport mlmc_estimate(const LevelHierarchy& hierarchy, const std::vector<PointSet>& samples);

/// Standard MLCF: standard CF on every increment, with per-level kernels.
EstimateReport mlcf_standard(std::span<const SteinKernel> kernels, const std::vector<LevelData>& levels,
                             const SolveOptions& opts = {});
EstimateReport mlcf_standard(std::span<const SteinKernel> kernels, const LevelHierarchy& hierarchy,
                             const std::vector<SampleSplit>& splits, const SolveOptions& opts = {});

/// Simplified MLCF: simplified CF on every increment. Any sampling design.
EstimateReport mlcf_simplified(std::span<const SteinKernel> kernels, const std::vector<LevelData>& levels,
                               const SolveOptions& opts = {});
EstimateReport mlcf_simplified(std::span<const SteinKernel> kernels, const LevelHierarchy& hierarchy,
                               const std::vector<PointSet>& points, const SolveOptions& opts = {});

/// max over probe points of the distance to the nearest point of x0.
double fill_distance(const PointSet& x0, const PointSet& probe);

}  // namespace mlcf
