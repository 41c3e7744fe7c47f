#pragma once

#include "mlcf/estimators.hpp"
#include "mlcf/models.hpp"
#include "mlcf/sampling.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace mlcf {

enum class ProblemKind { bvp, lotka_volterra, synthetic };
enum class EstimatorKind { mc, cf, cf_standard, mlmc, mlcf_standard, mlcf_simplified };
enum class SamplerKind { iid, sobol, lhs, mcmc };
enum class AllocationPolicy { paper_preset, mlmc_optimal };

std::string to_string(ProblemKind p);
std::string to_string(EstimatorKind e);
std::string to_string(SamplerKind s);
std::string to_string(AllocationPolicy p);
ProblemKind parse_problem(const std::string& s);
EstimatorKind parse_estimator(const std::string& s);  // "cf" is the simplified single-level CF
SamplerKind parse_sampler(const std::string& s);      // "qmc" is accepted for sobol
AllocationPolicy parse_policy(const std::string& s);

inline bool is_multilevel(EstimatorKind e) {
  return e == EstimatorKind::mlmc || e == EstimatorKind::mlcf_standard || e == EstimatorKind::mlcf_simplified;
}

struct MethodSpec {
  EstimatorKind estimator = EstimatorKind::mc;
  SamplerKind sampler = SamplerKind::iid;
  std::string label() const;  // e.g. "mlcf-simplified(sobol)"
};

struct BvpSettings {
  std::vector<double> steps{1.0 / 8.0, 1.0 / 24.0, 1.0 / 72.0};
  double x1_scale = 0.2;
  bool x1_scale_is_variance = false;
  std::size_t truth_nodes = 40;
  /// Reference for the finest-level integrand (default) or the h -> 0 limit.
  bool truth_continuum = false;
  double truth_step = 1.0 / 1024.0;  // only used with truth_continuum
};

struct LvSettings {
  std::vector<double> steps{0.5, 0.1, 0.02};
  double likelihood_step = 0.05;
  bool finite_difference_score = false;
  std::string data_path;  // empty: shipped data set
  Eigen::VectorXd prior_mean;  // empty: lv_default_prior()
  Eigen::VectorXd prior_sd;
  // reference (truth) chain
  double truth_step = 0.005;
  std::size_t reference_states = 1000000;
  std::size_t reference_eval_every = 5;
  std::uint64_t reference_seed = 20240101;
  std::size_t pilot_states = 20000;
  std::size_t pilot_burn_in = 3000;
  // replication chains
  std::size_t thin = 5;
};

/// pi = N(0, I_d), f_1 = |x|^2, f_0 = 0.9 f_1.
struct SyntheticSettings {
  int dim = 2;
  std::vector<double> costs{1e-3, 4e-3};
};

struct McmcSettings {
  std::size_t burn_in = 1000;
  double step_scale = 0.5;
  std::size_t thin = 1;
};

struct ExperimentConfig {
  std::string name;
  ProblemKind problem = ProblemKind::synthetic;
  std::vector<MethodSpec> methods;

  std::vector<double> budgets;  // seconds; one run per budget
  AllocationPolicy policy = AllocationPolicy::paper_preset;
  std::vector<std::size_t> level_sizes;  // explicit n_l; overrides the budget
  std::size_t single_level_size = 0;     // n for mc / cf; 0 means allocate or use n_L
  std::vector<std::size_t> fit_sizes;    // m_l; empty means ceil(n_l / 2)
  std::size_t pilot_size = 32;           // per-level pilot for mlmc-optimal

  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Seconds per level-l sample (f_l and, for l > 0, f_{l-1}); default: published costs for
  /// three-level bvp / lotka-volterra, otherwise measured. `measure_costs` forces timing.
  std::optional<std::vector<double>> costs;
  bool measure_costs = false;

  KernelPolicy kernel;
  SolveOptions solve;
  McmcSettings mcmc;

  BvpSettings bvp;
  LvSettings lv;
  SyntheticSettings synthetic;

  /// Throws ConfigError on any invalid combination.
  void validate() const;
  std::size_t level_count() const;
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);
/// A path to a JSON file, or the name of a shipped preset ("bvp-table1", "lv-table2").
ExperimentConfig load_config(const std::string& path_or_preset);
std::vector<std::string> preset_names();

/// One config per entry of `budgets` (or the config itself when sizes are explicit).
std::vector<ExperimentConfig> expand_budgets(const ExperimentConfig& config);

struct Allocation {
  std::vector<std::size_t> level_sizes;
  std::size_t single_level_size = 0;
  std::vector<double> unrounded;  // mlmc-optimal sizes before flooring
  double nominal_cost = 0.0;      // sum_l n_l C_l
};

/// Per-level sample sizes under budget T given the cost C_l of one level-l sample.
/// `paper-preset` needs `problem` and a published budget; `mlmc-optimal` needs
/// per-level increment variances.
Allocation allocate_budget(const std::vector<double>& costs, double budget, AllocationPolicy policy,
                           std::optional<ProblemKind> problem = std::nullopt,
                           const std::vector<double>& variances = {});

/// Hierarchy, target, truth and sampling machinery for one problem. Expensive parts
/// (reference chains, quadrature) are computed once and shared across runs.
class Problem {
 public:
  static std::shared_ptr<const Problem> build(const ExperimentConfig& config);

  ProblemKind kind() const { return kind_; }
  const LevelHierarchy& hierarchy() const { return *hierarchy_; }
  const TargetDensity& target() const { return target_; }
  const TruthOracle& truth() const { return truth_; }
  /// Seconds per level-l sample.
  std::vector<double> costs() const { return hierarchy_->costs(); }
  std::size_t level_count() const { return hierarchy_->size(); }
  std::optional<GaussianSpec> input_spec() const { return input_; }

  /// Draws n points for `sampler`; MCMC chains also return scores and acceptance.
  struct Draw {
    PointSet points;
    std::vector<Eigen::VectorXd> scores;
    double acceptance = std::numeric_limits<double>::quiet_NaN();
  };
  Draw draw(SamplerKind sampler, std::size_t n, SeededStream stream, const ExperimentConfig& config) const;

  /// Points for fill-distance probes.
  PointSet probe_points(std::size_t n, SeededStream stream) const;

 private:
  ProblemKind kind_ = ProblemKind::synthetic;
  std::unique_ptr<LevelHierarchy> hierarchy_;
  TargetDensity target_;
  TruthOracle truth_;
  std::optional<GaussianSpec> input_;
  // posterior problems
  PointSet reference_states_;
  Eigen::MatrixXd proposal_cov_;
  double reference_step_ = 0.0;
  std::size_t chain_thin_ = 1;
};

struct ReplicationRecord {
  std::size_t method = 0;  // index into config.methods
  std::size_t replication = 0;
  bool failed = false;
  std::string error;
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double abs_error = std::numeric_limits<double>::quiet_NaN();
  double cost_seconds = 0.0;  // nominal: sample counts times per-sample costs
  std::vector<LevelReport> levels;
};

struct MethodSummary {
  std::string method;
  std::string sampler;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double median_error = std::numeric_limits<double>::quiet_NaN();
  double q1_error = std::numeric_limits<double>::quiet_NaN();
  double q3_error = std::numeric_limits<double>::quiet_NaN();
  double mean_estimate = std::numeric_limits<double>::quiet_NaN();
  double sd_estimate = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  ExperimentConfig config;
  Allocation allocation;
  std::vector<double> costs;  // per level-l sample
  TruthOracle truth;
  std::vector<ReplicationRecord> records;  // sorted by (replication, method)
  std::vector<MethodSummary> summary;      // one per method, config order
  double wall_seconds = 0.0;               // measured, excluded from determinism

  /// Absolute errors of successful replications of method i, by replication.
  std::vector<double> errors(std::size_t method) const;
  std::vector<double> estimates(std::size_t method) const;
};

/// Linear-interpolation quantile of unsorted data, q in [0,1].
double quantile(std::vector<double> values, double q);
std::vector<MethodSummary> summarize(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records);

/// Sizes of a single-budget config (explicit sizes, or the budget under the config's policy).
Allocation resolve_allocation(const ExperimentConfig& config, const Problem& problem);

RunResult run_experiment(const ExperimentConfig& config);
RunResult run_experiment(const ExperimentConfig& config, const Problem& problem);

/// One-sided sign test: P(at least `wins` successes of `trials` fair coin flips).
double sign_test_p(std::size_t wins, std::size_t trials);

// ---------------------------------------------------------------------------
// Output

/// Writes results.csv and summary.json into `dir` (created if needed).
void emit_results(const RunResult& result, const std::filesystem::path& dir);
std::string results_csv(const RunResult& result);
std::string summary_json(const RunResult& result);

struct CsvRow {
  std::string method;
  std::string sampler;
  std::size_t replication = 0;
  double estimate = 0.0;
  double abs_error = 0.0;
  double cost_seconds = 0.0;
};
std::vector<CsvRow> parse_results_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Diagnostics

struct LevelDiagnostics {
  std::size_t level = 0;
  std::string sampler;
  std::size_t n = 0;
  std::size_t m = 0;
  double fill_distance = 0.0;
  double condition = 0.0;
  double lengthscale = 0.0;
  double jitter = 0.0;
  double acceptance = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // set when this level could not be fitted
};

struct DiagnosticsReport {
  std::vector<LevelDiagnostics> levels;
  std::string to_text() const;
};

/// Per-level fit diagnostics for replication 0 of the first multilevel method.
DiagnosticsReport diagnose(const ExperimentConfig& config);
DiagnosticsReport diagnose(const ExperimentConfig& config, const Problem& problem);

}  // namespace mlcf
