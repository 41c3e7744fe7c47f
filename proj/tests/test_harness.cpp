#include "doctest.h"
#include "mlcf/harness.hpp"
#include "support.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

using namespace mlcf;

namespace {

ExperimentConfig synthetic_config(std::vector<MethodSpec> methods, std::size_t reps = 4) {
  ExperimentConfig c;
  c.name = "unit";
  c.problem = ProblemKind::synthetic;
  c.methods = std::move(methods);
  c.level_sizes = {40, 12};
  c.single_level_size = 20;
  c.replications = reps;
  c.seed = 11;
  return c;
}

const MethodSpec kMlcf{EstimatorKind::mlcf_simplified, SamplerKind::iid};
const MethodSpec kMlmc{EstimatorKind::mlmc, SamplerKind::iid};
const MethodSpec kStd{EstimatorKind::mlcf_standard, SamplerKind::iid};
const MethodSpec kMc{EstimatorKind::mc, SamplerKind::iid};

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("budget allocation: published presets") {
  const auto& bvp = kBvpPaperCosts;
  const auto a = allocate_budget(bvp, 0.30, AllocationPolicy::paper_preset, ProblemKind::bvp);
  CHECK(a.level_sizes == std::vector<std::size_t>{70, 10, 2});
  CHECK(a.single_level_size == 15);
  CHECK(allocate_budget(bvp, 0.91, AllocationPolicy::paper_preset, ProblemKind::bvp).level_sizes ==
        std::vector<std::size_t>{209, 31, 5});
  const auto b = allocate_budget(bvp, 1.52, AllocationPolicy::paper_preset, ProblemKind::bvp);
  CHECK(b.level_sizes == std::vector<std::size_t>{349, 52, 6});
  CHECK(b.single_level_size == 75);

  const auto& lv = kLvPaperCosts;
  const auto l = allocate_budget(lv, 0.26, AllocationPolicy::paper_preset, ProblemKind::lotka_volterra);
  CHECK(l.level_sizes == std::vector<std::size_t>{207, 23, 2});
  CHECK(l.single_level_size == 20);
  CHECK(allocate_budget(lv, 0.51, AllocationPolicy::paper_preset, ProblemKind::lotka_volterra).level_sizes ==
        std::vector<std::size_t>{413, 47, 4});
  CHECK(allocate_budget(lv, 0.77, AllocationPolicy::paper_preset, ProblemKind::lotka_volterra).level_sizes ==
        std::vector<std::size_t>{620, 70, 6});
  // Published LV rows spend their budget: sum_l n_l C_l is within a few percent of T.
  for (double t : {0.26, 0.51, 0.77}) {
    const auto r = allocate_budget(lv, t, AllocationPolicy::paper_preset, ProblemKind::lotka_volterra);
    CHECK(std::abs(r.nominal_cost - t) < 0.03 * t);
  }

  CHECK_THROWS_AS(allocate_budget(bvp, 0.5, AllocationPolicy::paper_preset, ProblemKind::bvp), ConfigError);
  CHECK_THROWS_AS(allocate_budget(bvp, 0.30, AllocationPolicy::paper_preset), ConfigError);
  CHECK_THROWS_AS(allocate_budget(bvp, 0.001, AllocationPolicy::paper_preset, ProblemKind::bvp), ConfigError);
}

TEST_CASE("budget allocation: mlmc-optimal square-root rule") {
  const auto a = allocate_budget({1, 4, 16}, 1000.0, AllocationPolicy::mlmc_optimal, std::nullopt, {1, 1, 1});
  REQUIRE(a.unrounded.size() == 3);
  CHECK(a.unrounded[0] / a.unrounded[2] == doctest::Approx(4.0));
  CHECK(a.unrounded[1] / a.unrounded[2] == doctest::Approx(2.0));
  double spent = 0.0;
  const std::vector<double> c{1, 4, 16};
  for (int l = 0; l < 3; ++l) spent += a.unrounded[l] * c[l];
  CHECK(spent == doctest::Approx(1000.0));
  CHECK(a.single_level_size == 62);

  const auto tiny = allocate_budget({1, 4, 16}, 20.0, AllocationPolicy::mlmc_optimal, std::nullopt, {1, 1e-9, 1e-9});
  for (auto n : tiny.level_sizes) CHECK(n >= 2);
  CHECK_THROWS(allocate_budget({1, 4}, 10.0, AllocationPolicy::mlmc_optimal, std::nullopt, {1}));
  CHECK_THROWS(allocate_budget({1, -4}, 10.0, AllocationPolicy::mlmc_optimal, std::nullopt, {1, 1}));
}

TEST_CASE("enum names and aliases") {
  CHECK(parse_estimator("cf") == EstimatorKind::cf);
  CHECK(parse_estimator("mlmcmc") == EstimatorKind::mlmc);
  CHECK(parse_sampler("qmc") == SamplerKind::sobol);
  CHECK(parse_problem("lv") == ProblemKind::lotka_volterra);
  CHECK(parse_policy("mlmc-optimal") == AllocationPolicy::mlmc_optimal);
  for (auto e : {EstimatorKind::mc, EstimatorKind::cf, EstimatorKind::cf_standard, EstimatorKind::mlmc,
                 EstimatorKind::mlcf_standard, EstimatorKind::mlcf_simplified}) {
    CHECK(parse_estimator(to_string(e)) == e);
  }
  CHECK_THROWS_AS(parse_sampler("halton"), ConfigError);
  CHECK(MethodSpec{EstimatorKind::mlcf_simplified, SamplerKind::sobol}.label() == "mlcf-simplified(sobol)");
}

TEST_CASE("config: validity gate, unknown keys and round trip") {
  auto c = synthetic_config({kMlcf});
  c.methods.push_back({EstimatorKind::mlcf_standard, SamplerKind::sobol});
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.methods.back() = {EstimatorKind::cf_standard, SamplerKind::lhs};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.methods.back() = kStd;
  CHECK_NOTHROW(c.validate());

  const std::string gated = R"({"problem":"bvp","budgets":[0.3],
    "methods":[{"estimator":"mlcf-standard","sampler":"mcmc"}]})";
  try {
    config_from_json_text(gated);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("i.i.d.") != std::string::npos);
  }
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"lotka-volterra","budgets":[0.26],
    "methods":[{"estimator":"mlmc","sampler":"iid"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"bvp","budgets":[0.3],"methods":[],"bugdet":1})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"bvp","budgets":[0.3],"bvp":{"step":[0.1]}})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text("{not json"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"bvp","budgets":[-1]})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"bvp","budgets":[0.3],"replications":0})"), ConfigError);
  CHECK_THROWS_AS(config_from_json_text(R"({"problem":"synthetic","level_sizes":[10,4],"fit_sizes":[10,2]})"),
                  ConfigError);

  c.kernel.lengthscale = 0.7;
  c.solve.jitter_scale = 1e-6;
  c.fit_sizes = {10, 4};
  c.costs = std::vector<double>{0.5, 1.0};
  const auto text = config_to_json_text(c);
  const auto back = config_from_json_text(text);
  CHECK(config_to_json_text(back) == text);
  CHECK(back.methods.size() == 2);
  CHECK(*back.kernel.lengthscale == 0.7);
  CHECK(back.fit_sizes == c.fit_sizes);
}

TEST_CASE("config: shipped presets") {
  const auto names = preset_names();
  CHECK(std::find(names.begin(), names.end(), "bvp-table1") != names.end());
  CHECK(std::find(names.begin(), names.end(), "lv-table2") != names.end());
  const auto bvp = load_config("bvp-table1");
  CHECK(bvp.problem == ProblemKind::bvp);
  CHECK(bvp.budgets == std::vector<double>{0.30, 0.91, 1.52});
  CHECK(bvp.replications == 100);
  const auto lv = load_config("lv-table2");
  CHECK(lv.problem == ProblemKind::lotka_volterra);
  CHECK(lv.replications == 50);
  const auto runs = expand_budgets(lv);
  REQUIRE(runs.size() == 3);
  CHECK(runs[2].budgets == std::vector<double>{0.77});
  CHECK(runs[0].name != runs[1].name);
  CHECK_THROWS(load_config("no-such-preset"));
}

TEST_CASE("smoke: one replication of plain Monte Carlo for x^2 under N(0,1)") {
  auto c = synthetic_config({kMc}, 1);
  c.synthetic.dim = 1;
  c.single_level_size = 10;
  const auto r = run_experiment(c);
  REQUIRE(r.records.size() == 1);
  CHECK(!r.records[0].failed);
  CHECK(std::isfinite(r.records[0].estimate));
  CHECK(r.records[0].abs_error == doctest::Approx(std::abs(r.records[0].estimate - 1.0)));
  CHECK(r.truth.value == 1.0);
}

TEST_CASE("determinism across runs and thread counts") {
  auto c = synthetic_config({kMc, kMlmc, kStd, kMlcf, {EstimatorKind::mlcf_simplified, SamplerKind::sobol},
                             {EstimatorKind::cf, SamplerKind::lhs}},
                            6);
  const auto a = run_experiment(c);
  c.threads = 3;
  const auto b = run_experiment(c);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].estimate == b.records[i].estimate);
    CHECK(a.records[i].method == b.records[i].method);
    CHECK(a.records[i].replication == b.records[i].replication);
  }
  c.seed = 12;
  const auto d = run_experiment(c);
  CHECK(d.records[0].estimate != a.records[0].estimate);
}

TEST_CASE("draws do not depend on which other methods are in the run") {
  auto c = synthetic_config({kMlmc, kMlcf}, 3);
  const auto r = run_experiment(c);
  auto c2 = synthetic_config({kMlmc}, 3);
  const auto r2 = run_experiment(c2);
  CHECK(r.estimates(0) == r2.estimates(0));
}

TEST_CASE("quantiles, summaries and the sign test") {
  CHECK(quantile({4, 1, 3, 2}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({4, 1, 3, 2}, 0.25) == doctest::Approx(1.75));
  CHECK(quantile({7}, 0.9) == 7.0);
  CHECK(std::isnan(quantile({}, 0.5)));
  CHECK(sign_test_p(10, 10) == doctest::Approx(1.0 / 1024));
  CHECK(sign_test_p(0, 10) == doctest::Approx(1.0));
  CHECK(sign_test_p(5, 10) == doctest::Approx(638.0 / 1024));
  CHECK(sign_test_p(60, 100) == doctest::Approx(0.028443966820490).epsilon(1e-9));
}

TEST_CASE("output: header-only csv, failures, round trip") {
  auto empty = synthetic_config({}, 2);
  const auto e = run_experiment(empty);
  CHECK(results_csv(e) == "method,sampler,replication,estimate,abs_error,cost_seconds\n");

  // Wide x1 spread: some draws make the coefficient degenerate and fail their batch.
  ExperimentConfig c;
  c.name = "failures";
  c.problem = ProblemKind::bvp;
  c.methods = {kMlmc, kMlcf, kMc};
  c.level_sizes = {10, 4, 2};
  c.single_level_size = 6;
  c.bvp.x1_scale = 0.45;
  c.bvp.truth_nodes = 20;
  c.replications = 40;
  c.seed = 3;
  const auto r = run_experiment(c);
  std::size_t failures = 0;
  for (const auto& s : r.summary) failures += s.failures;
  CHECK(failures > 0);
  CHECK(failures < r.records.size());
  const auto rows = parse_results_csv(results_csv(r));
  CHECK(rows.size() == c.replications * c.methods.size() - failures);
  for (const auto& rec : r.records) {
    if (rec.failed) CHECK(!rec.error.empty());
  }

  for (std::size_t i = 0; i < c.methods.size(); ++i) {
    std::vector<double> errs;
    for (const auto& row : rows) {
      if (row.method == to_string(c.methods[i].estimator)) errs.push_back(row.abs_error);
    }
    CHECK(std::abs(quantile(errs, 0.5) - r.summary[i].median_error) <= 1e-12 * r.summary[i].median_error);
    CHECK(std::abs(quantile(errs, 0.75) - r.summary[i].q3_error) <= 1e-12 * r.summary[i].q3_error);
  }

  const auto dir = std::filesystem::temp_directory_path() / "mlcf_test_harness";
  emit_results(r, dir);
  CHECK(read_file(dir / "results.csv") == results_csv(r));
  const auto summary = read_file(dir / "summary.json");
  CHECK(summary.find("\"failure_rate\"") != std::string::npos);
  CHECK(summary.find("\"truth\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("mlcf beats mlmc on the ODE benchmark at the largest preset budget") {
  auto c = load_config("bvp-table1");
  c.methods = {kMlmc, kMlcf};
  c.budgets = {1.52};
  c.threads = 0;
  const auto r = run_experiment(c);
  const auto e0 = r.errors(0), e1 = r.errors(1);
  REQUIRE(e0.size() == 100);
  REQUIRE(e1.size() == 100);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < e0.size(); ++i) wins += e1[i] < e0[i];
  CHECK(r.summary[1].median_error < r.summary[0].median_error);
  CHECK(sign_test_p(wins, e0.size()) < 0.05);
  CHECK(r.allocation.level_sizes == std::vector<std::size_t>{349, 52, 6});
}

TEST_CASE("budget honesty with measured costs") {
  auto c = load_config("bvp-table1");
  c.measure_costs = true;
  c.methods = {kMlmc};
  c.replications = 1;
  const auto problem = Problem::build(c);
  const auto costs = problem->costs();
  CHECK(std::is_sorted(costs.begin(), costs.end()));
  for (const auto& run : expand_budgets(c)) {
    const auto a = resolve_allocation(run, *problem);
    double spent = 0.0;
    for (std::size_t l = 0; l < costs.size(); ++l) spent += a.level_sizes[l] * costs[l];
    CHECK(spent <= 1.1 * run.budgets.at(0));
  }
}

TEST_CASE("mlmc-optimal policy runs end to end") {
  auto c = synthetic_config({kMlmc, kMlcf, kMc}, 3);
  c.level_sizes.clear();
  c.single_level_size = 0;
  c.policy = AllocationPolicy::mlmc_optimal;
  c.costs = std::vector<double>{1e-3, 4e-3};
  c.budgets = {0.5};
  const auto r = run_experiment(c);
  CHECK(r.allocation.level_sizes.size() == 2);
  CHECK(r.allocation.level_sizes[0] > r.allocation.level_sizes[1]);
  CHECK(r.allocation.nominal_cost <= 0.5 + 1e-12);
  for (const auto& s : r.summary) CHECK(s.successes == 3);
}

TEST_CASE("diagnostics") {
  auto c = load_config("bvp-table1");
  c.budgets = {0.30};
  const auto report = diagnose(c);
  REQUIRE(report.levels.size() == 3);
  for (std::size_t l = 0; l < 3; ++l) {
    CHECK(report.levels[l].level == l);
    CHECK(report.levels[l].fill_distance > 0.0);
    CHECK(report.levels[l].lengthscale > 0.0);
    CHECK(report.levels[l].condition >= 1.0);
  }
  CHECK(report.levels[0].n == 70);
  CHECK(report.to_text().find("fill") != std::string::npos);

  // Single fitting point: the fill distance is the largest probe distance from it.
  const PointSet probes = test::normal_points(2, 200, 4);
  const PointSet one{Eigen::Vector2d(0.1, -0.2)};
  double far = 0.0;
  for (const auto& p : probes) far = std::max(far, (p - one[0]).norm());
  CHECK(fill_distance(one, probes) == far);

  // Doubling m does not increase the median fill distance.
  auto s = synthetic_config({kStd}, 1);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t m : {8, 16, 32, 64}) {
    s.level_sizes = {2 * m, 2 * m};
    s.fit_sizes = {m, m};
    std::vector<double> fills;
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      s.seed = seed;
      fills.push_back(diagnose(s).levels[0].fill_distance);
    }
    const double med = test::median(fills);
    CHECK(med <= prev);
    prev = med;
  }
}

TEST_CASE("lotka-volterra smoke run with a short reference chain") {
  ExperimentConfig c;
  c.name = "lv-smoke";
  c.problem = ProblemKind::lotka_volterra;
  c.methods = {{EstimatorKind::mc, SamplerKind::mcmc},
               {EstimatorKind::mlmc, SamplerKind::mcmc},
               {EstimatorKind::mlcf_simplified, SamplerKind::mcmc}};
  c.level_sizes = {30, 8, 3};
  c.single_level_size = 6;
  c.replications = 2;
  c.seed = 5;
  c.lv.reference_states = 3000;
  c.lv.pilot_states = 1500;
  c.lv.pilot_burn_in = 500;
  const auto problem = Problem::build(c);
  CHECK(problem->level_count() == 3);
  CHECK(std::isfinite(problem->truth().value));
  CHECK(problem->truth().error > 0.0);
  CHECK(problem->costs() == kLvPaperCosts);
  const auto d = problem->draw(SamplerKind::mcmc, 10, {1, 2}, c);
  CHECK(d.points.size() == 10);
  CHECK(d.scores.size() == 10);
  CHECK(d.acceptance > 0.0);
  CHECK_THROWS(problem->draw(SamplerKind::iid, 10, {1, 2}, c));
  const auto r = run_experiment(c, *problem);
  CHECK(r.records.size() == 6);
  for (const auto& rec : r.records) {
    if (!rec.failed) CHECK(std::isfinite(rec.estimate));
  }
}
