#pragma once

#include "mlcf/estimators.hpp"
#include "mlcf/sampling.hpp"
#include "mlcf/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlcf {

/// Reference value of an integral with an estimate of its own error.
struct TruthOracle {
  std::string method;
  double value = 0.0;
  double error = 0.0;
};

// ---------------------------------------------------------------------------
// Boundary-value ODE  d/dz (c(z) du/dz) = -50^2 x2^2,  c(z) = 1 + x1 z,  u(0) = u(1) = 0.

inline constexpr double kBvpForcingScale = 50.0;

class DegenerateCoefficientError : public EvaluationError {
 public:
  using EvaluationError::EvaluationError;
};

/// Tridiagonal system; lower[0] and upper[n-1] are unused.
struct TridiagonalSystem {
  Eigen::VectorXd lower, diag, upper, rhs;
};

Eigen::VectorXd thomas_solve(const TridiagonalSystem& sys);

/// Number of cells 1/h; throws unless 1/h is an integer >= 2.
std::size_t bvp_cells(double h);

/// Conservative (flux-form) interior system for the unknowns u(z_1) .. u(z_{N-1}).
TridiagonalSystem bvp_system(double x1, double x2, double h);

/// Grid values u(z_1) .. u(z_N) with z_i = i h (the last entry is the boundary value 0).
Eigen::VectorXd bvp_solve(double x1, double x2, double h);

/// h * sum_i u(z_i) for x = (x1, x2).
double bvp_integrand(const Point& x, double h);

/// Distribution of (x1, x2). `x1_scale` is read as the standard deviation unless
/// `scale_is_variance` is set, in which case sd = sqrt(x1_scale).
GaussianSpec bvp_input_spec(double x1_scale = 0.2, bool scale_is_variance = false);

struct BvpTruthOptions {
  double step = 1.0 / 1024.0;
  std::size_t nodes = 40;
  /// Include the grid-refinement delta in the error, i.e. treat the value as
  /// the h -> 0 integral. When false the reference is for the integrand at `step`.
  bool continuum = true;
};

/// Tensor Gauss-Hermite quadrature of the BVP integrand against the spec.
TruthOracle bvp_truth(const GaussianSpec& spec, const BvpTruthOptions& opts = {});

/// Gauss-Hermite nodes/weights for the weight exp(-t^2) (Golub-Welsch).
void gauss_hermite(std::size_t n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights);

// ---------------------------------------------------------------------------
// Lotka-Volterra: du1/dt = x1 u1 - x2 u1 u2,  du2/dt = x3 u1 u2 - x4 u2,
// u(0) = (x5, x6), log-normal observation noise with sds x7, x8; x = exp(x~).

inline constexpr int kLvDim = 8;

class TrajectoryError : public EvaluationError {
 public:
  TrajectoryError(const std::string& what, double time) : EvaluationError(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

struct LvParameters {
  Eigen::VectorXd log_values;  // x~, length 8

  explicit LvParameters(const Point& log_values);
  Eigen::VectorXd natural() const { return log_values.array().exp().matrix(); }
};

struct LvTrajectory {
  double step = 0.0;
  std::vector<double> times;
  std::vector<double> prey;
  std::vector<double> predator;
};

struct LvDataset {
  std::vector<double> times;  // offsets from the first year
  std::vector<double> hare;
  std::vector<double> lynx;

  /// CSV with header `year,hare,lynx`.
  static LvDataset load_csv(const std::string& path);
  /// data/hare_lynx.csv from the data directory.
  static LvDataset standard();
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
  void validate() const;
};

/// Number of steps s/h; throws unless s/h is a positive integer.
std::size_t lv_steps(double h, double horizon);

/// Classical RK4 with fixed step h over [0, horizon].
LvTrajectory lv_solve(const LvParameters& params, double h, double horizon);

/// horizon^-1 h sum_{i=1}^{s/h} u1(t_i).
double lv_integrand(const Point& log_params, double h, double horizon);

GaussianSpec lv_default_prior();

struct LvDiagnostics {
  bool trajectory_failed = false;
  std::string message;
};

/// Log-normal observation log-likelihood (constants dropped).
double lv_log_likelihood(const Point& log_params, const LvDataset& data, double h);

/// Unnormalised log posterior; -infinity (with diagnostics) if the trajectory fails.
double lv_log_posterior(const Point& log_params, const LvDataset& data, const GaussianSpec& prior, double h,
                        LvDiagnostics* diag = nullptr);

/// Gradient of lv_log_posterior by forward sensitivities integrated with the same RK4 step.
Eigen::VectorXd lv_score(const Point& log_params, const LvDataset& data, const GaussianSpec& prior, double h);

std::pair<double, Eigen::VectorXd> lv_log_posterior_and_score(const Point& log_params, const LvDataset& data,
                                                               const GaussianSpec& prior, double h);

/// Posterior as a TargetDensity (score from sensitivities, or central differences if requested).
TargetDensity lv_target(const LvDataset& data, const GaussianSpec& prior, double h, bool finite_difference_score = false);

// ---------------------------------------------------------------------------
// Level hierarchies.

/// Per-level sample costs of the published experiments (seconds).
inline const std::vector<double> kBvpPaperCosts{1.22e-3, 3.57e-3, 11.89e-3};
inline const std::vector<double> kLvPaperCosts{6.88e-4, 34.41e-4, 165.18e-4};

/// Seconds per level-l sample: `evals` timed evaluations of f_l (and f_{l-1} for l > 0) at the
/// probe points; result is made nondecreasing.
std::vector<double> measure_level_costs(const std::vector<Integrand>& integrands, const PointSet& probes,
                                        std::size_t evals = 50);

/// Level l uses step steps[l]; steps must be strictly decreasing. Costs are measured when not given.
LevelHierarchy make_bvp_hierarchy(const std::vector<double>& steps,
                                  std::optional<std::vector<double>> costs = std::nullopt);
LevelHierarchy make_lv_hierarchy(const std::vector<double>& steps, double horizon,
                                 std::optional<std::vector<double>> costs = std::nullopt,
                                 const Point& probe = Point());

}  // namespace mlcf
