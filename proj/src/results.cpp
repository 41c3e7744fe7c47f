#include "mlcf/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mlcf {

namespace {

constexpr const char* kCsvHeader = "method,sampler,replication,estimate,abs_error,cost_seconds";

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string results_csv(const RunResult& result) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : result.records) {
    if (r.failed) continue;
    const auto& m = result.config.methods.at(r.method);
    os << to_string(m.estimator) << ',' << to_string(m.sampler) << ',' << r.replication << ',' << g17(r.estimate) << ','
       << g17(r.abs_error) << ',' << g17(r.cost_seconds) << '\n';
  }
  return os.str();
}

std::string summary_json(const RunResult& result) {
  using nlohmann::json;
  json j;
  j["config"] = json::parse(config_to_json_text(result.config));
  j["truth"] = {{"value", result.truth.value}, {"error", result.truth.error}, {"method", result.truth.method}};
  j["costs"] = result.costs;
  j["allocation"] = {{"level_sizes", result.allocation.level_sizes},
                     {"single_level_size", result.allocation.single_level_size},
                     {"nominal_cost", result.allocation.nominal_cost}};
  j["replications"] = result.config.replications;
  j["wall_seconds"] = result.wall_seconds;
  j["methods"] = json::array();
  for (std::size_t i = 0; i < result.summary.size(); ++i) {
    const auto& s = result.summary[i];
    json failures = json::array();
    for (const auto& r : result.records) {
      if (r.method == i && r.failed) failures.push_back({{"replication", r.replication}, {"error", r.error}});
    }
    const double total = static_cast<double>(s.successes + s.failures);
    j["methods"].push_back({{"method", s.method},
                            {"sampler", s.sampler},
                            {"successes", s.successes},
                            {"failures", s.failures},
                            {"failure_rate", total > 0 ? static_cast<double>(s.failures) / total : 0.0},
                            {"median_abs_error", number_or_null(s.median_error)},
                            {"q1_abs_error", number_or_null(s.q1_error)},
                            {"q3_abs_error", number_or_null(s.q3_error)},
                            {"mean_estimate", number_or_null(s.mean_estimate)},
                            {"sd_estimate", number_or_null(s.sd_estimate)},
                            {"failed_replications", failures}});
  }
  return j.dump(2);
}

void emit_results(const RunResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "results.csv", results_csv(result));
  write_file(dir / "summary.json", summary_json(result) + "\n");
}

std::vector<CsvRow> parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("results csv: unexpected header");
  std::vector<CsvRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[6];
    for (int k = 0; k < 6; ++k) {
      if (!std::getline(row, f[k], k < 5 ? ',' : '\n')) throw std::runtime_error("results csv: short row '" + line + "'");
    }
    rows.push_back({f[0], f[1], std::stoul(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return rows;
}

}  // namespace mlcf
