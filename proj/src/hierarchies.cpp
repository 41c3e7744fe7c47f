#include "mlcf/models.hpp"

#include <algorithm>
#include <chrono>

namespace mlcf {

namespace {

void require_decreasing(const std::vector<double>& steps) {
  if (steps.empty()) throw std::invalid_argument("hierarchy: at least one step required");
  for (std::size_t l = 1; l < steps.size(); ++l) {
    if (!(steps[l] < steps[l - 1])) throw std::invalid_argument("hierarchy: steps must be strictly decreasing");
  }
}

LevelHierarchy assemble(std::vector<Integrand> integrands, std::optional<std::vector<double>> costs,
                        const PointSet& probes) {
  const auto c = costs ? *costs : measure_level_costs(integrands, probes);
  if (c.size() != integrands.size()) throw std::invalid_argument("hierarchy: cost count does not match level count");
  std::vector<LevelHierarchy::Level> levels;
  for (std::size_t l = 0; l < integrands.size(); ++l) levels.push_back({std::move(integrands[l]), c[l]});
  return LevelHierarchy(std::move(levels));
}

}  // namespace

std::vector<double> measure_level_costs(const std::vector<Integrand>& integrands, const PointSet& probes,
                                        std::size_t evals) {
  if (probes.empty()) throw std::invalid_argument("measure_level_costs: no probe points");
  std::vector<double> costs;
  volatile double sink = 0.0;
  for (std::size_t l = 0; l < integrands.size(); ++l) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < evals; ++i) {
      const Point& x = probes[i % probes.size()];
      sink = sink + integrands[l](x);
      if (l > 0) sink = sink - integrands[l - 1](x);
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    double c = elapsed.count() / static_cast<double>(std::max<std::size_t>(evals, 1));
    c = std::max(c, 1e-12);
    if (!costs.empty()) c = std::max(c, costs.back());
    costs.push_back(c);
  }
  return costs;
}

LevelHierarchy make_bvp_hierarchy(const std::vector<double>& steps, std::optional<std::vector<double>> costs) {
  require_decreasing(steps);
  std::vector<Integrand> fs;
  for (double h : steps) {
    bvp_cells(h);
    fs.push_back([h](const Point& x) { return bvp_integrand(x, h); });
  }
  return assemble(std::move(fs), std::move(costs), {Eigen::Vector2d(0.1, 1.0), Eigen::Vector2d(-0.2, 0.5)});
}

LevelHierarchy make_lv_hierarchy(const std::vector<double>& steps, double horizon,
                                 std::optional<std::vector<double>> costs, const Point& probe) {
  require_decreasing(steps);
  std::vector<Integrand> fs;
  for (double h : steps) {
    lv_steps(h, horizon);
    fs.push_back([h, horizon](const Point& x) { return lv_integrand(x, h, horizon); });
  }
  const Point p = probe.size() == kLvDim ? probe : lv_default_prior().mean;
  return assemble(std::move(fs), std::move(costs), {p});
}

}  // namespace mlcf
