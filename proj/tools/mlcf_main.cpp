// mlcf: run, allocate and diagnose multilevel control-functional experiments.
#include "mlcf/harness.hpp"

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"

namespace {

void print_summary(const mlcf::RunResult& r) {
  std::printf("truth %.10g (error %.3g; %s)\n", r.truth.value, r.truth.error, r.truth.method.c_str());
  std::printf("sizes n =");
  for (auto n : r.allocation.level_sizes) std::printf(" %zu", n);
  std::printf(", single-level %zu, nominal cost %.4g s\n", r.allocation.single_level_size, r.allocation.nominal_cost);
  std::printf("%-18s %-7s %6s %6s %14s %14s %14s\n", "method", "sampler", "ok", "failed", "median|err|", "q1", "q3");
  for (const auto& s : r.summary) {
    std::printf("%-18s %-7s %6zu %6zu %14.6g %14.6g %14.6g\n", s.method.c_str(), s.sampler.c_str(), s.successes,
                s.failures, s.median_error, s.q1_error, s.q3_error);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilevel control functionals: experiment runner"};
  app.require_subcommand(1);

  std::string config_arg, out_dir = "results";
  std::optional<std::uint64_t> seed;
  std::optional<double> budget;
  std::optional<std::size_t> replications, threads;
  bool measure = false;

  auto* run = app.add_subcommand("run", "run an experiment and write results.csv / summary.json");
  run->add_option("--config", config_arg, "config file or preset name (bvp-table1, lv-table2)")->required();
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--measure-costs", measure, "time the level integrands instead of using published costs");
  run->add_option("--budget", budget, "run a single budget (seconds)");
  run->add_option("--replications", replications, "override the replication count");
  run->add_option("--threads", threads, "worker threads (0 = all cores)");

  std::string problem_arg = "bvp", policy_arg = "paper-preset";
  double alloc_budget = 0.0;
  std::vector<double> costs, variances;
  auto* allocate = app.add_subcommand("allocate", "per-level sample sizes for a budget");
  allocate->add_option("--problem", problem_arg, "bvp | lotka-volterra | synthetic");
  allocate->add_option("--budget", alloc_budget, "budget T in seconds")->required();
  allocate->add_option("--policy", policy_arg, "paper-preset | mlmc-optimal");
  allocate->add_option("--costs", costs, "cost of one level-l sample C_l (default: published costs)")->delimiter(',');
  allocate->add_option("--variances", variances, "increment variances V_l (mlmc-optimal)")->delimiter(',');

  auto* diagnose = app.add_subcommand("diagnose", "per-level fill distance, conditioning and lengthscales");
  diagnose->add_option("--config", config_arg, "config file or preset name")->required();
  diagnose->add_option("--seed", seed, "master seed");
  diagnose->add_option("--budget", budget, "budget to diagnose (default: the first)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || diagnose->parsed()) {
      auto config = mlcf::load_config(config_arg);
      if (seed) config.seed = *seed;
      if (budget) {
        config.budgets = {*budget};
        config.level_sizes.clear();
      }
      if (replications) config.replications = *replications;
      if (threads) config.threads = *threads;
      if (measure) config.measure_costs = true;
      config.validate();

      std::fprintf(stderr, "preparing %s problem...\n", mlcf::to_string(config.problem).c_str());
      const auto problem = mlcf::Problem::build(config);
      if (diagnose->parsed()) {
        std::cout << mlcf::diagnose(config, *problem).to_text();
        return 0;
      }
      const auto runs = mlcf::expand_budgets(config);
      for (const auto& c : runs) {
        const auto result = mlcf::run_experiment(c, *problem);
        const std::filesystem::path dir =
            runs.size() > 1 ? std::filesystem::path(out_dir) / c.name : std::filesystem::path(out_dir);
        mlcf::emit_results(result, dir);
        std::printf("== %s -> %s (%.1f s)\n", c.name.c_str(), dir.string().c_str(), result.wall_seconds);
        print_summary(result);
      }
      return 0;
    }

    const auto problem = mlcf::parse_problem(problem_arg);
    if (costs.empty()) {
      if (problem == mlcf::ProblemKind::bvp) costs = mlcf::kBvpPaperCosts;
      else if (problem == mlcf::ProblemKind::lotka_volterra) costs = mlcf::kLvPaperCosts;
      else throw mlcf::ConfigError("--costs is required for this problem");
    }
    const auto a = mlcf::allocate_budget(costs, alloc_budget, mlcf::parse_policy(policy_arg),
                                         problem, variances);
    std::printf("n =");
    for (auto n : a.level_sizes) std::printf(" %zu", n);
    std::printf("\nsingle-level n = %zu\nnominal cost = %.6g s\n", a.single_level_size, a.nominal_cost);
    return 0;
  } catch (const mlcf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
