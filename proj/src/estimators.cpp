#include "mlcf/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mlcf {

namespace {

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw EvaluationError(std::string(what) + ": non-finite integrand value");
}

Eigen::VectorXd evaluate(const Integrand& f, const PointSet& x) {
  Eigen::VectorXd y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[static_cast<Eigen::Index>(i)] = f(x[i]);
  return y;
}

// Also used for optional score lists, where an empty input stays empty.
PointSet slice(const PointSet& x, std::size_t begin, std::size_t end) {
  if (x.empty()) return {};
  return PointSet(x.begin() + static_cast<std::ptrdiff_t>(begin), x.begin() + static_cast<std::ptrdiff_t>(end));
}

void require_kernel_count(std::span<const SteinKernel> kernels, std::size_t levels) {
  if (kernels.size() != levels) {
    throw std::invalid_argument("multilevel estimator: " + std::to_string(kernels.size()) + " kernels for " +
                                std::to_string(levels) + " levels");
  }
}

EstimateReport finish(std::vector<LevelReport> per_level) {
  EstimateReport report;
  report.per_level = std::move(per_level);
  for (const auto& lv : report.per_level) {
    report.estimate += lv.contribution;
    report.total_cost += lv.cost * static_cast<double>(lv.n);
  }
  return report;
}

}  // namespace

std::size_t default_fit_size(std::size_t n) { return (n + 1) / 2; }

SampleSplit split_points(const PointSet& points, std::size_t m) {
  if (m == 0 || m > points.size()) {
    throw std::invalid_argument("split_points: fit size " + std::to_string(m) + " outside [1, " +
                                std::to_string(points.size()) + "]");
  }
  return {slice(points, 0, m), slice(points, m, points.size())};
}

double mc_estimate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("mc_estimate: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

CfFit cf_standard(const SteinKernel& kernel, const PointSet& x0, const Eigen::VectorXd& y0, const PointSet& x1,
                  const Eigen::VectorXd& y1, const SolveOptions& opts, const std::vector<Eigen::VectorXd>& s0,
                  const std::vector<Eigen::VectorXd>& s1) {
  if (x0.empty()) throw std::invalid_argument("cf_standard: empty fitting set");
  if (x1.empty()) throw std::invalid_argument("cf_standard: empty evaluation set (n - m = 0)");
  if (static_cast<std::size_t>(y0.size()) != x0.size() || static_cast<std::size_t>(y1.size()) != x1.size()) {
    throw DimensionError("cf_standard: value count does not match point count");
  }
  require_finite(y0, "cf_standard");
  require_finite(y1, "cf_standard");

  const auto sc0 = s0.empty() ? kernel.scores(x0) : s0;
  const auto sc1 = s1.empty() ? kernel.scores(x1) : s1;

  // The estimator is translation-equivariant; centring makes constants exact.
  const double shift = y0.mean();
  const auto m = static_cast<Eigen::Index>(x0.size());
  Eigen::MatrixXd rhs(m, 2);
  rhs.col(0) = y0.array() - shift;
  rhs.col(1).setOnes();
  const auto solved = solve_regularized(kernel.gram(x0, sc0), rhs, opts.jitter_scale, opts.max_escalations);
  const double beta = solved.solution.col(0).sum() / solved.solution.col(1).sum();
  const Eigen::VectorXd weights = solved.solution.col(0) - beta * solved.solution.col(1);
  const Eigen::VectorXd correction = kernel.cross(x1, sc1, x0, sc0) * weights;

  CfFit fit;
  fit.estimate = (y1.array() - shift - correction.array()).mean() + shift;
  fit.offset = beta + shift;
  fit.condition = solved.condition;
  fit.jitter = solved.jitter;
  return fit;
}

double cf_standard(const SteinKernel& kernel, const Integrand& f, const SampleSplit& split, const SolveOptions& opts) {
  return cf_standard(kernel, split.x0, evaluate(f, split.x0), split.x1, evaluate(f, split.x1), opts).estimate;
}

CfFit cf_simplified(const SteinKernel& kernel, const PointSet& x, const Eigen::VectorXd& y, const SolveOptions& opts,
                    const std::vector<Eigen::VectorXd>& scores) {
  if (x.empty()) throw std::invalid_argument("cf_simplified: empty point set");
  if (static_cast<std::size_t>(y.size()) != x.size()) {
    throw DimensionError("cf_simplified: value count does not match point count");
  }
  require_finite(y, "cf_simplified");
  const auto sc = scores.empty() ? kernel.scores(x) : scores;

  const double shift = y.mean();
  Eigen::MatrixXd rhs(y.size(), 2);
  rhs.col(0) = y.array() - shift;
  rhs.col(1).setOnes();
  const auto solved = solve_regularized(kernel.gram(x, sc), rhs, opts.jitter_scale, opts.max_escalations);

  CfFit fit;
  fit.estimate = solved.solution.col(0).sum() / solved.solution.col(1).sum() + shift;
  fit.offset = fit.estimate;
  fit.condition = solved.condition;
  fit.jitter = solved.jitter;
  return fit;
}

double cf_simplified(const SteinKernel& kernel, const Integrand& f, const PointSet& x, const SolveOptions& opts) {
  return cf_simplified(kernel, x, evaluate(f, x), opts).estimate;
}

LevelHierarchy::LevelHierarchy(std::vector<Level> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("LevelHierarchy: at least one level required");
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    if (!levels_[l].f) throw std::invalid_argument("LevelHierarchy: level " + std::to_string(l) + " has no integrand");
    if (!(levels_[l].cost > 0.0)) {
      throw std::invalid_argument("LevelHierarchy: cost of level " + std::to_string(l) + " must be positive");
    }
    if (l > 0 && levels_[l].cost < levels_[l - 1].cost) {
      throw std::invalid_argument("LevelHierarchy: costs must be nondecreasing in the level");
    }
  }
}

std::vector<double> LevelHierarchy::costs() const {
  std::vector<double> c;
  for (const auto& lv : levels_) c.push_back(lv.cost);
  return c;
}

double LevelHierarchy::increment(std::size_t l, const Point& x) const {
  const double fine = level(l).f(x);
  return l == 0 ? fine : fine - levels_[l - 1].f(x);
}

Eigen::VectorXd LevelHierarchy::increments(std::size_t l, const PointSet& x) const {
  Eigen::VectorXd y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[static_cast<Eigen::Index>(i)] = increment(l, x[i]);
  return y;
}

EstimateReport mlmc_estimate(const std::vector<LevelData>& levels) {
  if (levels.empty()) throw std::invalid_argument("mlmc_estimate: no levels");
  std::vector<LevelReport> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lv = levels[l];
    if (lv.values.size() == 0) throw std::invalid_argument("mlmc_estimate: level " + std::to_string(l) + " is empty");
    require_finite(lv.values, "mlmc_estimate");
    LevelReport r;
    r.level = l;
    r.contribution = mc_estimate(std::span<const double>(lv.values.data(), static_cast<std::size_t>(lv.values.size())));
    r.n = static_cast<std::size_t>(lv.values.size());
    r.cost = lv.cost;
    out.push_back(r);
  }
  return finish(std::move(out));
}

EstimateReport mlmc_estimate(const LevelHierarchy& hierarchy, const std::vector<PointSet>& samples) {
  if (samples.size() != hierarchy.size()) {
    throw std::invalid_argument("mlmc_estimate: " + std::to_string(samples.size()) + " sample sets for " +
                                std::to_string(hierarchy.size()) + " levels");
  }
  std::vector<LevelData> data(samples.size());
  for (std::size_t l = 0; l < samples.size(); ++l) {
    if (samples[l].empty()) throw std::invalid_argument("mlmc_estimate: level " + std::to_string(l) + " is empty");
    data[l].values = hierarchy.increments(l, samples[l]);
    data[l].cost = hierarchy.level(l).cost;
  }
  return mlmc_estimate(data);
}

EstimateReport mlcf_standard(std::span<const SteinKernel> kernels, const std::vector<LevelData>& levels,
                             const SolveOptions& opts) {
  if (levels.empty()) throw std::invalid_argument("mlcf_standard: no levels");
  require_kernel_count(kernels, levels.size());
  std::vector<LevelReport> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lv = levels[l];
    const std::size_t n = lv.points.size();
    const std::size_t m = lv.fit_size;
    if (m == 0 || m > n) throw std::invalid_argument("mlcf_standard: level " + std::to_string(l) + " has invalid m");
    if (m == n) {
      throw ConfigError("mlcf_standard: level " + std::to_string(l) +
                        " has n - m = 0; the standard estimator needs a non-empty evaluation set");
    }
    if (static_cast<std::size_t>(lv.values.size()) != n) throw DimensionError("mlcf_standard: value count mismatch");
    const auto fit = cf_standard(kernels[l], slice(lv.points, 0, m), lv.values.head(static_cast<Eigen::Index>(m)),
                                 slice(lv.points, m, n), lv.values.tail(static_cast<Eigen::Index>(n - m)), opts,
                                 slice(lv.scores, 0, m), slice(lv.scores, m, n));
    LevelReport r;
    r.level = l;
    r.contribution = fit.estimate;
    r.offset = fit.offset;
    r.condition = fit.condition;
    r.jitter = fit.jitter;
    r.lengthscale = kernels[l].base().lengthscale();
    r.m = m;
    r.n = n;
    r.cost = lv.cost;
    out.push_back(r);
  }
  return finish(std::move(out));
}

EstimateReport mlcf_standard(std::span<const SteinKernel> kernels, const LevelHierarchy& hierarchy,
                             const std::vector<SampleSplit>& splits, const SolveOptions& opts) {
  if (splits.size() != hierarchy.size()) throw std::invalid_argument("mlcf_standard: split count != level count");
  std::vector<LevelData> data(splits.size());
  for (std::size_t l = 0; l < splits.size(); ++l) {
    if (splits[l].x1.empty()) {
      throw ConfigError("mlcf_standard: level " + std::to_string(l) + " has an empty evaluation set");
    }
    data[l].points = splits[l].x0;
    data[l].points.insert(data[l].points.end(), splits[l].x1.begin(), splits[l].x1.end());
    data[l].fit_size = splits[l].x0.size();
    data[l].values = hierarchy.increments(l, data[l].points);
    data[l].cost = hierarchy.level(l).cost;
  }
  return mlcf_standard(kernels, data, opts);
}

EstimateReport mlcf_simplified(std::span<const SteinKernel> kernels, const std::vector<LevelData>& levels,
                               const SolveOptions& opts) {
  if (levels.empty()) throw std::invalid_argument("mlcf_simplified: no levels");
  require_kernel_count(kernels, levels.size());
  std::vector<LevelReport> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lv = levels[l];
    const auto fit = cf_simplified(kernels[l], lv.points, lv.values, opts, lv.scores);
    LevelReport r;
    r.level = l;
    r.contribution = fit.estimate;
    r.offset = fit.offset;
    r.condition = fit.condition;
    r.jitter = fit.jitter;
    r.lengthscale = kernels[l].base().lengthscale();
    r.m = lv.points.size();
    r.n = lv.points.size();
    r.cost = lv.cost;
    out.push_back(r);
  }
  return finish(std::move(out));
}

EstimateReport mlcf_simplified(std::span<const SteinKernel> kernels, const LevelHierarchy& hierarchy,
                               const std::vector<PointSet>& points, const SolveOptions& opts) {
  if (points.size() != hierarchy.size()) throw std::invalid_argument("mlcf_simplified: point-set count != level count");
  std::vector<LevelData> data(points.size());
  for (std::size_t l = 0; l < points.size(); ++l) {
    data[l].points = points[l];
    data[l].values = hierarchy.increments(l, points[l]);
    data[l].cost = hierarchy.level(l).cost;
  }
  return mlcf_simplified(kernels, data, opts);
}

double fill_distance(const PointSet& x0, const PointSet& probe) {
  if (x0.empty() || probe.empty()) throw std::invalid_argument("fill_distance: empty point set");
  double worst = 0.0;
  for (const auto& p : probe) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& x : x0) {
      require_same_dim(p, x, "fill_distance");
      nearest = std::min(nearest, (p - x).squaredNorm());
    }
    worst = std::max(worst, nearest);
  }
  return std::sqrt(worst);
}

}  // namespace mlcf
