#include "mlcf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace mlcf {

using nlohmann::json;

namespace {

std::string config_dir() {
  if (const char* env = std::getenv("MLCF_CONFIG_DIR")) return env;
#ifdef MLCF_CONFIG_DIR
  return MLCF_CONFIG_DIR;
#else
  return "configs";
#endif
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_vector(const json& obj, const char* key, Eigen::VectorXd& out, const std::string& where) {
  std::vector<double> v;
  read(obj, key, v, where);
  if (obj.contains(key)) out = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct PresetRow {
  ProblemKind problem;
  double budget;
  std::vector<std::size_t> sizes;
  std::size_t single;
};

// Published sample sizes per budget; the single-level column serves both CF and MCMC.
const std::vector<PresetRow>& preset_rows() {
  static const std::vector<PresetRow> rows{
      {ProblemKind::bvp, 0.30, {70, 10, 2}, 15},
      {ProblemKind::bvp, 0.91, {209, 31, 5}, 45},
      {ProblemKind::bvp, 1.52, {349, 52, 6}, 75},
      {ProblemKind::lotka_volterra, 0.26, {207, 23, 2}, 20},
      {ProblemKind::lotka_volterra, 0.51, {413, 47, 4}, 40},
      {ProblemKind::lotka_volterra, 0.77, {620, 70, 6}, 60},
  };
  return rows;
}

}  // namespace

std::string to_string(ProblemKind p) {
  switch (p) {
    case ProblemKind::bvp: return "bvp";
    case ProblemKind::lotka_volterra: return "lotka-volterra";
    case ProblemKind::synthetic: return "synthetic";
  }
  return "?";
}

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::mc: return "mc";
    case EstimatorKind::cf: return "cf";
    case EstimatorKind::cf_standard: return "cf-standard";
    case EstimatorKind::mlmc: return "mlmc";
    case EstimatorKind::mlcf_standard: return "mlcf-standard";
    case EstimatorKind::mlcf_simplified: return "mlcf-simplified";
  }
  return "?";
}

std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::iid: return "iid";
    case SamplerKind::sobol: return "sobol";
    case SamplerKind::lhs: return "lhs";
    case SamplerKind::mcmc: return "mcmc";
  }
  return "?";
}

std::string to_string(AllocationPolicy p) {
  return p == AllocationPolicy::paper_preset ? "paper-preset" : "mlmc-optimal";
}

ProblemKind parse_problem(const std::string& s) {
  if (s == "bvp") return ProblemKind::bvp;
  if (s == "lotka-volterra" || s == "lv") return ProblemKind::lotka_volterra;
  if (s == "synthetic") return ProblemKind::synthetic;
  throw ConfigError("unknown problem '" + s + "' (expected bvp, lotka-volterra or synthetic)");
}

EstimatorKind parse_estimator(const std::string& s) {
  if (s == "mc" || s == "mcmc") return EstimatorKind::mc;
  if (s == "cf" || s == "cf-simplified") return EstimatorKind::cf;
  if (s == "cf-standard") return EstimatorKind::cf_standard;
  if (s == "mlmc" || s == "mlmcmc") return EstimatorKind::mlmc;
  if (s == "mlcf-standard") return EstimatorKind::mlcf_standard;
  if (s == "mlcf-simplified" || s == "mlcf") return EstimatorKind::mlcf_simplified;
  throw ConfigError("unknown estimator '" + s +
                    "' (expected mc, cf, cf-standard, mlmc, mlcf-standard or mlcf-simplified)");
}

SamplerKind parse_sampler(const std::string& s) {
  if (s == "iid") return SamplerKind::iid;
  if (s == "sobol" || s == "qmc") return SamplerKind::sobol;
  if (s == "lhs") return SamplerKind::lhs;
  if (s == "mcmc" || s == "mala") return SamplerKind::mcmc;
  throw ConfigError("unknown sampler '" + s + "' (expected iid, sobol, lhs or mcmc)");
}

AllocationPolicy parse_policy(const std::string& s) {
  if (s == "paper-preset") return AllocationPolicy::paper_preset;
  if (s == "mlmc-optimal") return AllocationPolicy::mlmc_optimal;
  throw ConfigError("unknown allocation policy '" + s + "' (expected paper-preset or mlmc-optimal)");
}

std::string MethodSpec::label() const { return to_string(estimator) + "(" + to_string(sampler) + ")"; }

std::size_t ExperimentConfig::level_count() const {
  switch (problem) {
    case ProblemKind::bvp: return bvp.steps.size();
    case ProblemKind::lotka_volterra: return lv.steps.size();
    case ProblemKind::synthetic: return 2;
  }
  return 0;
}

void ExperimentConfig::validate() const {
  if (replications < 1) throw ConfigError("replications must be at least 1");
  for (double b : budgets) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("budgets must be positive");
  }
  const std::size_t levels = level_count();
  if (levels == 0) throw ConfigError("the level hierarchy is empty");
  if (level_sizes.empty() && budgets.empty()) throw ConfigError("give either budgets or level_sizes");
  if (!level_sizes.empty()) {
    if (level_sizes.size() != levels) {
      throw ConfigError("level_sizes has " + std::to_string(level_sizes.size()) + " entries for " +
                        std::to_string(levels) + " levels");
    }
    for (auto n : level_sizes) {
      if (n == 0) throw ConfigError("level sizes must be positive");
    }
  }
  if (!fit_sizes.empty()) {
    if (fit_sizes.size() != levels) throw ConfigError("fit_sizes must have one entry per level");
    for (std::size_t l = 0; l < levels; ++l) {
      if (fit_sizes[l] == 0) throw ConfigError("fit sizes must be positive");
      if (!level_sizes.empty() && fit_sizes[l] >= level_sizes[l]) {
        throw ConfigError("fit size m_" + std::to_string(l) + " must be smaller than n_" + std::to_string(l));
      }
    }
  }
  if (costs) {
    if (costs->size() != levels) throw ConfigError("costs must have one entry per level");
    for (std::size_t l = 0; l < levels; ++l) {
      if (!((*costs)[l] > 0.0)) throw ConfigError("costs must be positive");
      if (l > 0 && (*costs)[l] < (*costs)[l - 1]) throw ConfigError("costs must be nondecreasing in the level");
    }
  }
  if (policy == AllocationPolicy::mlmc_optimal && pilot_size < 2) throw ConfigError("pilot_size must be at least 2");
  if (!(solve.jitter_scale >= 0.0)) throw ConfigError("solve.jitter_scale must be nonnegative");
  if (kernel.lengthscale && !(*kernel.lengthscale > 0.0)) throw ConfigError("kernel.lengthscale must be positive");
  if (!(kernel.amplitude > 0.0)) throw ConfigError("kernel.amplitude must be positive");
  if (problem == ProblemKind::synthetic && synthetic.dim < 1) throw ConfigError("synthetic.dim must be positive");
  if (problem == ProblemKind::synthetic && synthetic.costs.size() != 2) {
    throw ConfigError("synthetic.costs must have two entries");
  }
  if (problem == ProblemKind::lotka_volterra) {
    if (lv.reference_states == 0 || lv.reference_eval_every == 0 || lv.thin == 0) {
      throw ConfigError("lv.reference_states, lv.reference_eval_every and lv.thin must be positive");
    }
  }

  for (const auto& m : methods) {
    const bool standard = m.estimator == EstimatorKind::mlcf_standard || m.estimator == EstimatorKind::cf_standard;
    if (standard && m.sampler != SamplerKind::iid) {
      throw ConfigError(m.label() +
                        " is not allowed: the standard estimator is unbiased only when its evaluation points are "
                        "i.i.d. draws independent of the fitting points; use mlcf-simplified / cf for " +
                        to_string(m.sampler) + " points");
    }
    if (problem == ProblemKind::lotka_volterra && m.sampler != SamplerKind::mcmc) {
      throw ConfigError(m.label() + ": the lotka-volterra posterior can only be sampled with mcmc");
    }
  }
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"name", "problem", "methods", "budgets", "budget", "policy", "level_sizes", "single_level_size",
                  "fit_sizes", "pilot_size", "replications", "seed", "threads", "costs", "measure_costs", "kernel",
                  "solve", "mcmc", "bvp", "lotka_volterra", "synthetic"},
                 "config");
  ExperimentConfig c;
  read(j, "name", c.name, "config");
  if (!j.contains("problem")) throw ConfigError("config: 'problem' is required");
  c.problem = parse_problem(j.at("problem").get<std::string>());
  if (j.contains("methods")) {
    if (!j.at("methods").is_array()) throw ConfigError("config.methods: expected an array");
    for (const auto& m : j.at("methods")) {
      reject_unknown(m, {"estimator", "sampler"}, "config.methods[]");
      if (!m.contains("estimator")) throw ConfigError("config.methods[]: 'estimator' is required");
      MethodSpec spec;
      spec.estimator = parse_estimator(m.at("estimator").get<std::string>());
      spec.sampler = m.contains("sampler") ? parse_sampler(m.at("sampler").get<std::string>())
                     : c.problem == ProblemKind::lotka_volterra ? SamplerKind::mcmc
                                                                : SamplerKind::iid;
      c.methods.push_back(spec);
    }
  }
  read(j, "budgets", c.budgets, "config");
  if (j.contains("budget")) {
    double b = 0.0;
    read(j, "budget", b, "config");
    c.budgets = {b};
  }
  if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
  read(j, "level_sizes", c.level_sizes, "config");
  read(j, "single_level_size", c.single_level_size, "config");
  read(j, "fit_sizes", c.fit_sizes, "config");
  read(j, "pilot_size", c.pilot_size, "config");
  read(j, "replications", c.replications, "config");
  read(j, "seed", c.seed, "config");
  read(j, "threads", c.threads, "config");
  if (j.contains("costs") && !j.at("costs").is_null()) {
    std::vector<double> costs;
    read(j, "costs", costs, "config");
    c.costs = costs;
  }
  read(j, "measure_costs", c.measure_costs, "config");

  if (j.contains("kernel")) {
    const auto& k = j.at("kernel");
    reject_unknown(k, {"lengthscale", "amplitude"}, "config.kernel");
    if (k.contains("lengthscale") && !k.at("lengthscale").is_null()) c.kernel.lengthscale = k.at("lengthscale").get<double>();
    read(k, "amplitude", c.kernel.amplitude, "config.kernel");
  }
  if (j.contains("solve")) {
    const auto& s = j.at("solve");
    reject_unknown(s, {"jitter_scale", "max_escalations"}, "config.solve");
    read(s, "jitter_scale", c.solve.jitter_scale, "config.solve");
    read(s, "max_escalations", c.solve.max_escalations, "config.solve");
  }
  if (j.contains("mcmc")) {
    const auto& s = j.at("mcmc");
    reject_unknown(s, {"burn_in", "step_scale", "thin"}, "config.mcmc");
    read(s, "burn_in", c.mcmc.burn_in, "config.mcmc");
    read(s, "step_scale", c.mcmc.step_scale, "config.mcmc");
    read(s, "thin", c.mcmc.thin, "config.mcmc");
  }
  if (j.contains("bvp")) {
    const auto& s = j.at("bvp");
    reject_unknown(s, {"steps", "x1_scale", "x1_scale_is_variance", "truth_nodes", "truth_continuum", "truth_step"},
                   "config.bvp");
    read(s, "steps", c.bvp.steps, "config.bvp");
    read(s, "x1_scale", c.bvp.x1_scale, "config.bvp");
    read(s, "x1_scale_is_variance", c.bvp.x1_scale_is_variance, "config.bvp");
    read(s, "truth_nodes", c.bvp.truth_nodes, "config.bvp");
    read(s, "truth_continuum", c.bvp.truth_continuum, "config.bvp");
    read(s, "truth_step", c.bvp.truth_step, "config.bvp");
  }
  if (j.contains("lotka_volterra")) {
    const auto& s = j.at("lotka_volterra");
    const std::string w = "config.lotka_volterra";
    reject_unknown(s,
                   {"steps", "likelihood_step", "finite_difference_score", "data_path", "prior_mean", "prior_sd",
                    "truth_step", "reference_states", "reference_eval_every", "reference_seed", "pilot_states",
                    "pilot_burn_in", "thin"},
                   w);
    read(s, "steps", c.lv.steps, w);
    read(s, "likelihood_step", c.lv.likelihood_step, w);
    read(s, "finite_difference_score", c.lv.finite_difference_score, w);
    read(s, "data_path", c.lv.data_path, w);
    read_vector(s, "prior_mean", c.lv.prior_mean, w);
    read_vector(s, "prior_sd", c.lv.prior_sd, w);
    read(s, "truth_step", c.lv.truth_step, w);
    read(s, "reference_states", c.lv.reference_states, w);
    read(s, "reference_eval_every", c.lv.reference_eval_every, w);
    read(s, "reference_seed", c.lv.reference_seed, w);
    read(s, "pilot_states", c.lv.pilot_states, w);
    read(s, "pilot_burn_in", c.lv.pilot_burn_in, w);
    read(s, "thin", c.lv.thin, w);
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    reject_unknown(s, {"dim", "costs"}, "config.synthetic");
    read(s, "dim", c.synthetic.dim, "config.synthetic");
    read(s, "costs", c.synthetic.costs, "config.synthetic");
  }
  c.validate();
  return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["problem"] = to_string(c.problem);
  j["methods"] = json::array();
  for (const auto& m : c.methods) j["methods"].push_back({{"estimator", to_string(m.estimator)}, {"sampler", to_string(m.sampler)}});
  j["budgets"] = c.budgets;
  j["policy"] = to_string(c.policy);
  j["level_sizes"] = c.level_sizes;
  j["single_level_size"] = c.single_level_size;
  j["fit_sizes"] = c.fit_sizes;
  j["pilot_size"] = c.pilot_size;
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["costs"] = c.costs ? json(*c.costs) : json(nullptr);
  j["measure_costs"] = c.measure_costs;
  j["kernel"] = {{"lengthscale", c.kernel.lengthscale ? json(*c.kernel.lengthscale) : json(nullptr)},
                 {"amplitude", c.kernel.amplitude}};
  j["solve"] = {{"jitter_scale", c.solve.jitter_scale}, {"max_escalations", c.solve.max_escalations}};
  j["mcmc"] = {{"burn_in", c.mcmc.burn_in}, {"step_scale", c.mcmc.step_scale}, {"thin", c.mcmc.thin}};
  switch (c.problem) {
    case ProblemKind::bvp:
      j["bvp"] = {{"steps", c.bvp.steps},
                  {"x1_scale", c.bvp.x1_scale},
                  {"x1_scale_is_variance", c.bvp.x1_scale_is_variance},
                  {"truth_nodes", c.bvp.truth_nodes},
                  {"truth_continuum", c.bvp.truth_continuum},
                  {"truth_step", c.bvp.truth_step}};
      break;
    case ProblemKind::lotka_volterra: {
      json s = {{"steps", c.lv.steps},
                {"likelihood_step", c.lv.likelihood_step},
                {"finite_difference_score", c.lv.finite_difference_score},
                {"data_path", c.lv.data_path},
                {"truth_step", c.lv.truth_step},
                {"reference_states", c.lv.reference_states},
                {"reference_eval_every", c.lv.reference_eval_every},
                {"reference_seed", c.lv.reference_seed},
                {"pilot_states", c.lv.pilot_states},
                {"pilot_burn_in", c.lv.pilot_burn_in},
                {"thin", c.lv.thin}};
      if (c.lv.prior_mean.size()) s["prior_mean"] = as_vector(c.lv.prior_mean);
      if (c.lv.prior_sd.size()) s["prior_sd"] = as_vector(c.lv.prior_sd);
      j["lotka_volterra"] = s;
      break;
    }
    case ProblemKind::synthetic:
      j["synthetic"] = {{"dim", c.synthetic.dim}, {"costs", c.synthetic.costs}};
      break;
  }
  return j.dump(2);
}

std::vector<std::string> preset_names() { return {"bvp-table1", "lv-table2"}; }

ExperimentConfig load_config(const std::string& path_or_preset) {
  std::filesystem::path path(path_or_preset);
  if (!std::filesystem::exists(path)) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), path_or_preset) == names.end()) {
      throw ConfigError("config '" + path_or_preset + "' is neither a file nor a preset (bvp-table1, lv-table2)");
    }
    path = std::filesystem::path(config_dir()) / (path_or_preset + ".json");
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<ExperimentConfig> expand_budgets(const ExperimentConfig& config) {
  if (!config.level_sizes.empty() || config.budgets.size() <= 1) return {config};
  std::vector<ExperimentConfig> out;
  for (double b : config.budgets) {
    ExperimentConfig c = config;
    c.budgets = {b};
    std::ostringstream name;
    name << config.name << (config.name.empty() ? "" : "-") << "T" << b;
    c.name = name.str();
    out.push_back(std::move(c));
  }
  return out;
}

Allocation allocate_budget(const std::vector<double>& costs, double budget, AllocationPolicy policy,
                           std::optional<ProblemKind> problem, const std::vector<double>& variances) {
  if (costs.empty()) throw std::invalid_argument("allocate_budget: no levels");
  for (double c : costs) {
    if (!(c > 0.0)) throw std::invalid_argument("allocate_budget: costs must be positive");
  }
  const double top = *std::max_element(costs.begin(), costs.end());
  if (!(budget >= top)) {
    std::ostringstream os;
    os << "allocate_budget: budget " << budget << " s is smaller than one top-level evaluation (" << top << " s)";
    throw ConfigError(os.str());
  }

  Allocation a;
  if (policy == AllocationPolicy::paper_preset) {
    if (!problem) throw ConfigError("allocate_budget: paper-preset needs the problem");
    for (const auto& row : preset_rows()) {
      if (row.problem == *problem && std::abs(row.budget - budget) < 1e-9 && row.sizes.size() == costs.size()) {
        a.level_sizes = row.sizes;
        a.single_level_size = row.single;
      }
    }
    if (a.level_sizes.empty()) {
      std::ostringstream os;
      os << "allocate_budget: no published allocation for " << to_string(*problem) << " with " << costs.size()
         << " levels at T = " << budget << " (available:";
      for (const auto& row : preset_rows()) {
        if (row.problem == *problem) os << ' ' << row.budget;
      }
      os << ")";
      throw ConfigError(os.str());
    }
  } else {
    if (variances.size() != costs.size()) throw ConfigError("allocate_budget: mlmc-optimal needs one variance per level");
    double denom = 0.0;
    for (std::size_t l = 0; l < costs.size(); ++l) {
      if (!(variances[l] >= 0.0)) throw ConfigError("allocate_budget: variances must be nonnegative");
      denom += std::sqrt(variances[l] * costs[l]);
    }
    for (std::size_t l = 0; l < costs.size(); ++l) {
      // all-zero variances: spread the budget evenly in cost
      const double n = denom > 0.0 ? budget * std::sqrt(variances[l] / costs[l]) / denom
                                   : budget / (costs[l] * static_cast<double>(costs.size()));
      a.unrounded.push_back(n);
      a.level_sizes.push_back(std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(n))));
    }
    a.single_level_size = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(budget / costs.back())));
  }
  for (std::size_t l = 0; l < costs.size(); ++l) a.nominal_cost += static_cast<double>(a.level_sizes[l]) * costs[l];
  return a;
}

}  // namespace mlcf
