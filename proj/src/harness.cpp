#include "mlcf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

namespace mlcf {

namespace {

// Stream tags: per-level draws of a multilevel sampler, single-level draws, pilots.
std::uint64_t level_tag(SamplerKind s, std::size_t l) { return 16 * static_cast<std::uint64_t>(s) + l; }
std::uint64_t single_tag(SamplerKind s) { return 1000 + static_cast<std::uint64_t>(s); }
constexpr std::uint64_t kPilotStream = std::uint64_t{1} << 40;
constexpr std::uint64_t kProbeTag = 5000;

LevelHierarchy synthetic_hierarchy(int dim, const std::vector<double>& costs) {
  auto sq = [dim](const Point& x) {
    if (x.size() != dim) throw DimensionError("synthetic integrand: dimension mismatch");
    return x.squaredNorm();
  };
  return LevelHierarchy({{[sq](const Point& x) { return 0.9 * sq(x); }, costs[0]}, {sq, costs[1]}});
}

std::vector<double> default_costs(const ExperimentConfig& c, const std::vector<double>& published) {
  if (c.costs) return *c.costs;
  if (!c.measure_costs && published.size() == c.level_count()) return published;
  return {};
}

Eigen::MatrixXd sample_covariance(const PointSet& states) {
  const auto d = states.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& s : states) mean += s;
  mean /= static_cast<double>(states.size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : states) cov.noalias() += (s - mean) * (s - mean).transpose();
  cov /= static_cast<double>(std::max<std::size_t>(states.size() - 1, 1));
  // keep the proposal well conditioned even for a short pilot
  cov.diagonal().array() += 1e-10 * std::max(cov.diagonal().mean(), 1e-300);
  return cov;
}

// Standard error of the mean of a correlated series by non-overlapping batch means.
double batch_means_error(const std::vector<double>& v, std::size_t batches = 50) {
  batches = std::min(batches, v.size() / 2);
  if (batches < 2) return std::numeric_limits<double>::infinity();
  const std::size_t len = v.size() / batches;
  std::vector<double> means;
  for (std::size_t b = 0; b < batches; ++b) {
    means.push_back(std::accumulate(v.begin() + b * len, v.begin() + (b + 1) * len, 0.0) / static_cast<double>(len));
  }
  const double mu = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double ss = 0.0;
  for (double m : means) ss += (m - mu) * (m - mu);
  return std::sqrt(ss / static_cast<double>(batches - 1) / static_cast<double>(batches));
}

}  // namespace

std::shared_ptr<const Problem> Problem::build(const ExperimentConfig& config) {
  config.validate();
  auto p = std::make_shared<Problem>();
  p->kind_ = config.problem;
  switch (config.problem) {
    case ProblemKind::synthetic: {
      const int d = config.synthetic.dim;
      auto costs = config.costs ? *config.costs : config.synthetic.costs;
      p->hierarchy_ = std::make_unique<LevelHierarchy>(synthetic_hierarchy(d, costs));
      if (config.measure_costs) {
        std::vector<Integrand> fs{p->hierarchy_->level(0).f, p->hierarchy_->level(1).f};
        costs = measure_level_costs(fs, {Eigen::VectorXd::Ones(d)});
        p->hierarchy_ = std::make_unique<LevelHierarchy>(synthetic_hierarchy(d, costs));
      }
      p->input_ = GaussianSpec{Eigen::VectorXd::Zero(d), Eigen::VectorXd::Ones(d)};
      p->target_ = p->input_->target();
      p->truth_ = {"closed form E|x|^2 = d", static_cast<double>(d), 0.0};
      break;
    }
    case ProblemKind::bvp: {
      const auto& s = config.bvp;
      const auto costs = default_costs(config, kBvpPaperCosts);
      p->hierarchy_ = std::make_unique<LevelHierarchy>(
          make_bvp_hierarchy(s.steps, costs.empty() ? std::nullopt : std::optional(costs)));
      p->input_ = bvp_input_spec(s.x1_scale, s.x1_scale_is_variance);
      p->target_ = p->input_->target();
      BvpTruthOptions t;
      t.nodes = s.truth_nodes;
      t.continuum = s.truth_continuum;
      t.step = s.truth_continuum ? s.truth_step : s.steps.back();
      p->truth_ = bvp_truth(*p->input_, t);
      break;
    }
    case ProblemKind::lotka_volterra: {
      const auto& s = config.lv;
      const LvDataset data = s.data_path.empty() ? LvDataset::standard() : LvDataset::load_csv(s.data_path);
      GaussianSpec prior = lv_default_prior();
      if (s.prior_mean.size()) prior.mean = s.prior_mean;
      if (s.prior_sd.size()) prior.sd = s.prior_sd;
      if (prior.dim() != kLvDim || prior.sd.size() != kLvDim) {
        throw ConfigError("lotka_volterra prior_mean / prior_sd must have 8 entries");
      }
      const auto costs = default_costs(config, kLvPaperCosts);
      p->target_ = lv_target(data, prior, s.likelihood_step, s.finite_difference_score);

      // Pilot rounds: adaptive MALA from the prior mean, each round preconditioned with the
      // covariance of the previous round's second half.
      const SeededStream ref(s.reference_seed, 0);
      Point state = prior.mean;
      double step = 0.01;
      for (std::uint64_t round = 0; round < 3; ++round) {
        McmcOptions pilot;
        pilot.n = std::max<std::size_t>(s.pilot_states / 3, 100);
        pilot.burn_in = s.pilot_burn_in;
        pilot.step_scale = step;
        pilot.preconditioner = p->proposal_cov_;
        const auto run = mcmc_chain(p->target_, state, pilot, ref.child(1 + round));
        const PointSet tail(run.states.begin() + static_cast<std::ptrdiff_t>(run.states.size() / 2), run.states.end());
        p->proposal_cov_ = sample_covariance(tail);
        state = run.states.back();
        step = 1.0;
      }

      McmcOptions long_run;
      long_run.preconditioner = p->proposal_cov_;
      long_run.step_scale = 1.0;
      long_run.burn_in = 2000;
      long_run.thin = s.reference_eval_every;
      long_run.n = std::max<std::size_t>(s.reference_states / s.reference_eval_every, 2);
      const auto chain = mcmc_chain(p->target_, state, long_run, ref.child(10));
      p->reference_step_ = chain.step_size;
      p->reference_states_ = chain.states;
      p->chain_thin_ = s.thin;

      const double horizon = data.horizon();
      std::vector<double> fine;
      fine.reserve(chain.states.size());
      for (const auto& x : chain.states) fine.push_back(lv_integrand(x, s.truth_step, horizon));
      std::ostringstream method;
      method << "MALA reference chain, " << chain.states.size() * s.reference_eval_every << " states, f at h="
             << s.truth_step << " on every " << s.reference_eval_every << "th state, acceptance "
             << std::setprecision(3) << chain.acceptance_rate << ", batch-means error";
      p->truth_ = {method.str(), std::accumulate(fine.begin(), fine.end(), 0.0) / static_cast<double>(fine.size()),
                   batch_means_error(fine)};
      p->hierarchy_ = std::make_unique<LevelHierarchy>(make_lv_hierarchy(
          s.steps, horizon, costs.empty() ? std::nullopt : std::optional(costs), p->reference_states_.front()));
      break;
    }
  }
  return p;
}

Problem::Draw Problem::draw(SamplerKind sampler, std::size_t n, SeededStream stream,
                           const ExperimentConfig& config) const {
  Draw d;
  if (sampler == SamplerKind::mcmc) {
    McmcOptions o;
    o.n = n;
    Point init;
    if (!reference_states_.empty()) {
      auto eng = stream.child(1).engine();
      std::uniform_int_distribution<std::size_t> pick(0, reference_states_.size() - 1);
      init = reference_states_[pick(eng)];
      o.burn_in = 0;
      o.adapt = false;
      o.step_scale = reference_step_;
      o.preconditioner = proposal_cov_;
      o.thin = chain_thin_;
    } else {
      init = input_->mean;
      o.burn_in = config.mcmc.burn_in;
      o.step_scale = config.mcmc.step_scale;
      o.thin = config.mcmc.thin;
    }
    auto chain = mcmc_chain(target_, init, o, stream.child(2));
    d.points = std::move(chain.states);
    d.scores = std::move(chain.scores);
    d.acceptance = chain.acceptance_rate;
    return d;
  }
  if (!input_) throw ConfigError(to_string(sampler) + " sampling needs a Gaussian input distribution");
  switch (sampler) {
    case SamplerKind::iid: d.points = sample_iid(*input_, n, stream); break;
    case SamplerKind::sobol: d.points = sample_sobol(*input_, n, 0, stream); break;
    case SamplerKind::lhs: d.points = sample_lhs(*input_, n, stream); break;
    case SamplerKind::mcmc: break;
  }
  d.scores.reserve(d.points.size());
  for (const auto& x : d.points) d.scores.push_back(target_.score_at(x));
  return d;
}

PointSet Problem::probe_points(std::size_t n, SeededStream stream) const {
  if (input_) return sample_iid(*input_, n, stream);
  PointSet out;
  auto eng = stream.engine();
  std::uniform_int_distribution<std::size_t> pick(0, reference_states_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) out.push_back(reference_states_[pick(eng)]);
  return out;
}

Allocation resolve_allocation(const ExperimentConfig& config, const Problem& problem) {
  const auto costs = problem.costs();
  Allocation a;
  if (!config.level_sizes.empty()) {
    a.level_sizes = config.level_sizes;
    for (std::size_t l = 0; l < costs.size(); ++l) a.nominal_cost += static_cast<double>(a.level_sizes[l]) * costs[l];
  } else {
    if (config.budgets.size() != 1) throw ConfigError("run one budget at a time (see expand_budgets)");
    std::vector<double> variances;
    if (config.policy == AllocationPolicy::mlmc_optimal) {
      const SeededStream pilot(config.seed, kPilotStream);
      const SamplerKind s = problem.kind() == ProblemKind::lotka_volterra ? SamplerKind::mcmc : SamplerKind::iid;
      for (std::size_t l = 0; l < costs.size(); ++l) {
        const auto draw = problem.draw(s, config.pilot_size, pilot.child(l), config);
        const Eigen::VectorXd y = problem.hierarchy().increments(l, draw.points);
        variances.push_back((y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1));
      }
    }
    a = allocate_budget(costs, config.budgets.front(), config.policy, problem.kind(), variances);
  }
  if (config.single_level_size > 0) {
    a.single_level_size = config.single_level_size;
  } else if (a.single_level_size == 0) {
    // the single-level estimators get the multilevel budget
    const double top = problem.costs().back();
    a.single_level_size = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(a.nominal_cost / top)));
  }
  return a;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<MethodSummary> summarize(const ExperimentConfig& config, const std::vector<ReplicationRecord>& records) {
  std::vector<MethodSummary> out;
  for (std::size_t i = 0; i < config.methods.size(); ++i) {
    MethodSummary s;
    s.method = to_string(config.methods[i].estimator);
    s.sampler = to_string(config.methods[i].sampler);
    std::vector<double> err, est;
    for (const auto& r : records) {
      if (r.method != i) continue;
      if (r.failed) {
        ++s.failures;
        continue;
      }
      ++s.successes;
      err.push_back(r.abs_error);
      est.push_back(r.estimate);
    }
    if (!err.empty()) {
      s.median_error = quantile(err, 0.5);
      s.q1_error = quantile(err, 0.25);
      s.q3_error = quantile(err, 0.75);
      s.mean_estimate = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
      double ss = 0.0;
      for (double e : est) ss += (e - s.mean_estimate) * (e - s.mean_estimate);
      s.sd_estimate = est.size() > 1 ? std::sqrt(ss / static_cast<double>(est.size() - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<double> RunResult::errors(std::size_t method) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.method == method && !r.failed) out.push_back(r.abs_error);
  }
  return out;
}

std::vector<double> RunResult::estimates(std::size_t method) const {
  std::vector<double> out;
  for (const auto& r : records) {
    if (r.method == method && !r.failed) out.push_back(r.estimate);
  }
  return out;
}

double sign_test_p(std::size_t wins, std::size_t trials) {
  if (wins > trials) throw std::invalid_argument("sign_test_p: wins > trials");
  double p = 0.0;
  for (std::size_t k = wins; k <= trials; ++k) {
    p += std::exp(std::lgamma(static_cast<double>(trials) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                  std::lgamma(static_cast<double>(trials - k) + 1.0) - static_cast<double>(trials) * std::log(2.0));
  }
  return std::min(p, 1.0);
}

namespace {

struct SamplerBatch {
  std::string error;  // non-empty when drawing or evaluating failed
  std::vector<LevelData> levels;
};

std::vector<std::size_t> fit_sizes(const ExperimentConfig& config, const std::vector<std::size_t>& n) {
  if (!config.fit_sizes.empty()) return config.fit_sizes;
  std::vector<std::size_t> m;
  for (auto k : n) m.push_back(default_fit_size(k));
  return m;
}

LevelData evaluate_level(const Problem& problem, const ExperimentConfig& config, SamplerKind sampler,
                         std::size_t n, std::size_t level, bool increment, SeededStream stream, double cost) {
  auto draw = problem.draw(sampler, n, stream, config);
  LevelData d;
  d.values = increment ? problem.hierarchy().increments(level, draw.points) : Eigen::VectorXd(draw.points.size());
  if (!increment) {
    const auto& f = problem.hierarchy().level(level).f;
    for (std::size_t i = 0; i < draw.points.size(); ++i) d.values[static_cast<Eigen::Index>(i)] = f(draw.points[i]);
  }
  if (!d.values.allFinite()) throw EvaluationError("non-finite integrand value at level " + std::to_string(level));
  d.points = std::move(draw.points);
  d.scores = std::move(draw.scores);
  d.cost = cost;
  return d;
}

std::vector<SteinKernel> level_kernels(const Problem& problem, const ExperimentConfig& config,
                                       const std::vector<LevelData>& levels, bool fit_subset) {
  std::vector<SteinKernel> k;
  for (const auto& lv : levels) {
    const PointSet fit = fit_subset ? PointSet(lv.points.begin(), lv.points.begin() + static_cast<std::ptrdiff_t>(lv.fit_size))
                                    : lv.points;
    k.push_back(make_level_kernel(problem.target(), fit, config.kernel));
  }
  return k;
}

std::vector<ReplicationRecord> run_replication(const ExperimentConfig& config, const Problem& problem,
                                               const Allocation& alloc, std::size_t rep) {
  const SeededStream stream(config.seed, rep);
  const auto level_costs = problem.costs();
  const auto m = fit_sizes(config, alloc.level_sizes);
  const std::size_t top = problem.level_count() - 1;

  std::map<SamplerKind, SamplerBatch> multi, single;
  for (const auto& method : config.methods) {
    auto& bucket = is_multilevel(method.estimator) ? multi : single;
    if (bucket.count(method.sampler)) continue;
    SamplerBatch batch;
    try {
      if (is_multilevel(method.estimator)) {
        for (std::size_t l = 0; l < alloc.level_sizes.size(); ++l) {
          batch.levels.push_back(evaluate_level(problem, config, method.sampler, alloc.level_sizes[l], l, true,
                                                stream.child(level_tag(method.sampler, l)), level_costs[l]));
          batch.levels.back().fit_size = m[l];
        }
      } else {
        batch.levels.push_back(evaluate_level(problem, config, method.sampler, alloc.single_level_size, top, false,
                                              stream.child(single_tag(method.sampler)), level_costs[top]));
        batch.levels.back().fit_size = default_fit_size(alloc.single_level_size);
      }
    } catch (const std::exception& e) {
      batch.error = e.what();
      batch.levels.clear();
    }
    bucket.emplace(method.sampler, std::move(batch));
  }

  std::vector<ReplicationRecord> out;
  for (std::size_t i = 0; i < config.methods.size(); ++i) {
    const auto& method = config.methods[i];
    ReplicationRecord rec;
    rec.method = i;
    rec.replication = rep;
    const auto& batch = (is_multilevel(method.estimator) ? multi : single).at(method.sampler);
    try {
      if (!batch.error.empty()) throw EvaluationError(batch.error);
      EstimateReport report;
      switch (method.estimator) {
        case EstimatorKind::mlmc: report = mlmc_estimate(batch.levels); break;
        case EstimatorKind::mlcf_standard: {
          const auto k = level_kernels(problem, config, batch.levels, true);
          report = mlcf_standard(k, batch.levels, config.solve);
          break;
        }
        case EstimatorKind::mlcf_simplified: {
          const auto k = level_kernels(problem, config, batch.levels, false);
          report = mlcf_simplified(k, batch.levels, config.solve);
          break;
        }
        case EstimatorKind::mc: {
          // A single-level MLMC report keeps the bookkeeping uniform.
          report = mlmc_estimate(batch.levels);
          break;
        }
        case EstimatorKind::cf: {
          const auto k = level_kernels(problem, config, batch.levels, false);
          report = mlcf_simplified(k, batch.levels, config.solve);
          break;
        }
        case EstimatorKind::cf_standard: {
          const auto k = level_kernels(problem, config, batch.levels, true);
          report = mlcf_standard(k, batch.levels, config.solve);
          break;
        }
      }
      if (!std::isfinite(report.estimate)) throw EvaluationError("non-finite estimate");
      rec.estimate = report.estimate;
      rec.abs_error = std::abs(report.estimate - problem.truth().value);
      rec.cost_seconds = report.total_cost;
      rec.levels = std::move(report.per_level);
      for (auto& lr : rec.levels) lr.level += is_multilevel(method.estimator) ? 0 : top;
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config) {
  const auto problem = Problem::build(config);
  return run_experiment(config, *problem);
}

RunResult run_experiment(const ExperimentConfig& config, const Problem& problem) {
  config.validate();
  if (config.problem != problem.kind()) throw ConfigError("run_experiment: config and problem disagree");
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  result.config = config;
  result.costs = problem.costs();
  result.truth = problem.truth();
  result.allocation = resolve_allocation(config, problem);

  std::vector<std::vector<ReplicationRecord>> per_rep(config.replications);
  std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min(threads, config.replications);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < config.replications; r = next++) {
      per_rep[r] = run_replication(config, problem, result.allocation, r);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& recs : per_rep) {
    for (auto& r : recs) result.records.push_back(std::move(r));
  }
  result.summary = summarize(config, result.records);
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

DiagnosticsReport diagnose(const ExperimentConfig& config) {
  const auto problem = Problem::build(config);
  return diagnose(config, *problem);
}

DiagnosticsReport diagnose(const ExperimentConfig& config, const Problem& problem) {
  ExperimentConfig c = config;
  if (c.level_sizes.empty() && c.budgets.size() > 1) c.budgets.resize(1);
  const auto alloc = resolve_allocation(c, problem);
  const auto m = fit_sizes(c, alloc.level_sizes);

  MethodSpec chosen{EstimatorKind::mlcf_simplified,
                    problem.kind() == ProblemKind::lotka_volterra ? SamplerKind::mcmc : SamplerKind::iid};
  for (const auto& method : c.methods) {
    if (is_multilevel(method.estimator)) {
      chosen = method;
      break;
    }
  }
  const bool split = chosen.estimator == EstimatorKind::mlcf_standard;
  const SeededStream stream(c.seed, 0);
  const PointSet probe = problem.probe_points(500, stream.child(kProbeTag));

  DiagnosticsReport report;
  for (std::size_t l = 0; l < alloc.level_sizes.size(); ++l) {
    LevelDiagnostics d;
    d.level = l;
    d.sampler = to_string(chosen.sampler);
    d.n = alloc.level_sizes[l];
    d.m = split ? m[l] : d.n;
    try {
      auto draw = problem.draw(chosen.sampler, d.n, stream.child(level_tag(chosen.sampler, l)), c);
      d.acceptance = draw.acceptance;
      const PointSet fit(draw.points.begin(), draw.points.begin() + static_cast<std::ptrdiff_t>(d.m));
      const std::vector<Eigen::VectorXd> scores(draw.scores.begin(), draw.scores.begin() + static_cast<std::ptrdiff_t>(d.m));
      d.fill_distance = fill_distance(fit, probe);
      const auto kernel = make_level_kernel(problem.target(), fit, c.kernel);
      d.lengthscale = kernel.base().lengthscale();
      const auto solve = solve_regularized(kernel.gram(fit, scores), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d.m)),
                                           c.solve.jitter_scale, c.solve.max_escalations);
      d.condition = solve.condition;
      d.jitter = solve.jitter;
    } catch (const std::exception& e) {
      d.fill_distance = d.condition = d.lengthscale = d.jitter = std::numeric_limits<double>::quiet_NaN();
      d.error = e.what();
    }
    report.levels.push_back(d);
  }
  return report;
}

std::string DiagnosticsReport::to_text() const {
  std::ostringstream os;
  os << "level sampler      n     m  fill_distance   condition  lengthscale      jitter  acceptance\n";
  for (const auto& d : levels) {
    os << std::setw(5) << d.level << ' ' << std::setw(7) << d.sampler << ' ' << std::setw(6) << d.n << ' '
       << std::setw(5) << d.m << ' ' << std::setw(14) << std::setprecision(6) << d.fill_distance << ' ' << std::setw(11)
       << std::setprecision(4) << d.condition << ' ' << std::setw(12) << std::setprecision(6) << d.lengthscale << ' '
       << std::setw(11) << std::setprecision(3) << d.jitter << ' ' << std::setw(11) << std::setprecision(3)
       << d.acceptance;
    if (!d.error.empty()) os << "  error: " << d.error;
    os << '\n';
  }
  return os.str();
}

}  // namespace mlcf
