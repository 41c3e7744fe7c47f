#include "mlcf/models.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace mlcf {

namespace {

std::string data_dir() {
  if (const char* env = std::getenv("MLCF_DATA_DIR")) return env;
#ifdef MLCF_DATA_DIR
  return MLCF_DATA_DIR;
#else
  return "data";
#endif
}

// Column 0: state (u1, u2); columns 1..6: sensitivities with respect to x~1..x~6.
using SensState = Eigen::Matrix<double, 2, 7>;

struct Rates {
  double a, b, c, d;
};

Eigen::Vector2d field(const Eigen::Vector2d& u, const Rates& r) {
  return {r.a * u[0] - r.b * u[0] * u[1], r.c * u[0] * u[1] - r.d * u[1]};
}

SensState sens_field(const SensState& z, const Rates& r) {
  const double u1 = z(0, 0), u2 = z(1, 0);
  Eigen::Matrix2d jac;
  jac << r.a - r.b * u2, -r.b * u1, r.c * u2, r.c * u1 - r.d;
  SensState dz;
  dz.col(0) = field(z.col(0), r);
  dz.rightCols<6>() = jac * z.rightCols<6>();
  // explicit parameter dependence, d F / d x~j = x_j d F / d x_j
  dz(0, 1) += r.a * u1;
  dz(0, 2) -= r.b * u1 * u2;
  dz(1, 3) += r.c * u1 * u2;
  dz(1, 4) -= r.d * u2;
  return dz;
}

template <typename State, typename Field>
State rk4_step(const State& z, double h, const Field& f) {
  const State k1 = f(z);
  const State k2 = f(z + 0.5 * h * k1);
  const State k3 = f(z + 0.5 * h * k2);
  const State k4 = f(z + h * k3);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void check_state(double u1, double u2, double t) {
  if (!std::isfinite(u1) || !std::isfinite(u2) || u1 <= 0.0 || u2 <= 0.0) {
    std::ostringstream os;
    os << "lotka-volterra trajectory left the positive orthant at t = " << t << " (u = " << u1 << ", " << u2 << ")";
    throw TrajectoryError(os.str(), t);
  }
}

Rates rates_of(const Eigen::VectorXd& x) { return {x[0], x[1], x[2], x[3]}; }

std::vector<std::size_t> observation_indices(const LvDataset& data, double h) {
  std::vector<std::size_t> idx;
  for (double t : data.times) {
    const double k = std::round(t / h);
    if (std::abs(k * h - t) > 1e-9 * std::max(1.0, t)) {
      throw std::invalid_argument("lotka-volterra: observation time " + std::to_string(t) +
                                  " is not on the grid of step " + std::to_string(h));
    }
    idx.push_back(static_cast<std::size_t>(k));
  }
  return idx;
}

void check_log_params(const Point& x) {
  if (x.size() != kLvDim) throw DimensionError("lotka-volterra: expected 8 log-parameters");
  if (!x.allFinite()) throw EvaluationError("lotka-volterra: non-finite parameters " + format_point(x));
}

double log_prior(const Point& x, const GaussianSpec& prior) {
  return -0.5 * ((x - prior.mean).array() / prior.sd.array()).square().sum();
}

}  // namespace

LvParameters::LvParameters(const Point& values) : log_values(values) { check_log_params(values); }

void LvDataset::validate() const {
  if (times.size() != hare.size() || times.size() != lynx.size()) {
    throw std::invalid_argument("LvDataset: column lengths differ");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i] > times[i - 1])) throw std::invalid_argument("LvDataset: times must increase strictly");
    if (!(hare[i] > 0.0) || !(lynx[i] > 0.0)) throw std::invalid_argument("LvDataset: populations must be positive");
  }
}

LvDataset LvDataset::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("LvDataset: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("LvDataset: empty file " + path);
  if (line.rfind("year,hare,lynx", 0) != 0) throw std::runtime_error("LvDataset: expected header year,hare,lynx");
  LvDataset data;
  double first_year = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string a, b, c;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',') || !std::getline(row, c)) {
      throw std::runtime_error("LvDataset: malformed row '" + line + "'");
    }
    const double year = std::stod(a);
    if (data.times.empty()) first_year = year;
    data.times.push_back(year - first_year);
    data.hare.push_back(std::stod(b));
    data.lynx.push_back(std::stod(c));
  }
  data.validate();
  return data;
}

LvDataset LvDataset::standard() { return load_csv(data_dir() + "/hare_lynx.csv"); }

std::size_t lv_steps(double h, double horizon) {
  if (!(h > 0.0) || !(horizon > 0.0)) throw std::invalid_argument("lotka-volterra: step and horizon must be positive");
  const double steps = horizon / h;
  const double rounded = std::round(steps);
  if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * rounded) {
    throw std::invalid_argument("lotka-volterra: horizon / h must be an integer");
  }
  return static_cast<std::size_t>(rounded);
}

LvTrajectory lv_solve(const LvParameters& params, double h, double horizon) {
  const std::size_t steps = lv_steps(h, horizon);
  const Eigen::VectorXd x = params.natural();
  const Rates r = rates_of(x);
  LvTrajectory traj;
  traj.step = h;
  traj.times.reserve(steps + 1);
  traj.prey.reserve(steps + 1);
  traj.predator.reserve(steps + 1);
  Eigen::Vector2d u(x[4], x[5]);
  auto f = [&r](const Eigen::Vector2d& s) -> Eigen::Vector2d { return field(s, r); };
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    check_state(u[0], u[1], t);
    traj.times.push_back(t);
    traj.prey.push_back(u[0]);
    traj.predator.push_back(u[1]);
    if (k < steps) u = rk4_step<Eigen::Vector2d>(u, h, f);
  }
  return traj;
}

double lv_integrand(const Point& log_params, double h, double horizon) {
  const auto traj = lv_solve(LvParameters(log_params), h, horizon);
  double sum = 0.0;
  for (std::size_t k = 1; k < traj.prey.size(); ++k) sum += traj.prey[k];
  return h * sum / horizon;
}

GaussianSpec lv_default_prior() {
  Eigen::VectorXd mean(kLvDim), sd(kLvDim);
  mean << -1.2, -4.6, -4.6, -1.2, std::log(30.0), std::log(30.0), -1.0, -1.0;
  sd.setOnes();
  return {mean, sd};
}

double lv_log_likelihood(const Point& log_params, const LvDataset& data, double h) {
  check_log_params(log_params);
  if (data.times.empty()) return 0.0;
  const auto idx = observation_indices(data, h);
  const auto traj = lv_solve(LvParameters(log_params), h, std::max(data.horizon(), h));
  const double s1 = std::exp(log_params[6]), s2 = std::exp(log_params[7]);
  double ll = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double r1 = std::log(data.hare[i]) - std::log(traj.prey[idx[i]]);
    const double r2 = std::log(data.lynx[i]) - std::log(traj.predator[idx[i]]);
    ll += -log_params[6] - 0.5 * r1 * r1 / (s1 * s1) - log_params[7] - 0.5 * r2 * r2 / (s2 * s2);
  }
  return ll;
}

double lv_log_posterior(const Point& log_params, const LvDataset& data, const GaussianSpec& prior, double h,
                        LvDiagnostics* diag) {
  check_log_params(log_params);
  try {
    return log_prior(log_params, prior) + lv_log_likelihood(log_params, data, h);
  } catch (const TrajectoryError& e) {
    if (diag) {
      diag->trajectory_failed = true;
      diag->message = e.what();
    }
    return -std::numeric_limits<double>::infinity();
  }
}

std::pair<double, Eigen::VectorXd> lv_log_posterior_and_score(const Point& log_params, const LvDataset& data,
                                                               const GaussianSpec& prior, double h) {
  check_log_params(log_params);
  double lp = log_prior(log_params, prior);
  Eigen::VectorXd grad = -((log_params - prior.mean).array() / prior.sd.array().square()).matrix();
  if (data.times.empty()) return {lp, grad};

  const auto idx = observation_indices(data, h);
  const std::size_t steps = idx.back();
  const Eigen::VectorXd x = LvParameters(log_params).natural();
  const Rates r = rates_of(x);
  const double s1 = x[6], s2 = x[7];

  SensState z = SensState::Zero();
  z(0, 0) = x[4];
  z(1, 0) = x[5];
  z(0, 5) = x[4];  // d u1(0) / d x~5
  z(1, 6) = x[5];  // d u2(0) / d x~6
  auto f = [&r](const SensState& s) -> SensState { return sens_field(s, r); };

  std::size_t next = 0;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * h;
    check_state(z(0, 0), z(1, 0), t);
    while (next < idx.size() && idx[next] == k) {
      const double r1 = std::log(data.hare[next]) - std::log(z(0, 0));
      const double r2 = std::log(data.lynx[next]) - std::log(z(1, 0));
      lp += -log_params[6] - 0.5 * r1 * r1 / (s1 * s1) - log_params[7] - 0.5 * r2 * r2 / (s2 * s2);
      // d/dx~j of -r^2/(2 s^2) with r = log y - log u:  (r / s^2) (1/u) du/dx~j
      grad.head<6>() += (r1 / (s1 * s1 * z(0, 0))) * z.block<1, 6>(0, 1).transpose() +
                        (r2 / (s2 * s2 * z(1, 0))) * z.block<1, 6>(1, 1).transpose();
      grad[6] += -1.0 + r1 * r1 / (s1 * s1);
      grad[7] += -1.0 + r2 * r2 / (s2 * s2);
      ++next;
    }
    if (k < steps) z = rk4_step<SensState>(z, h, f);
  }
  if (!grad.allFinite()) throw EvaluationError("lv_score: non-finite sensitivities at " + format_point(log_params));
  return {lp, grad};
}

Eigen::VectorXd lv_score(const Point& log_params, const LvDataset& data, const GaussianSpec& prior, double h) {
  return lv_log_posterior_and_score(log_params, data, prior, h).second;
}

TargetDensity lv_target(const LvDataset& data, const GaussianSpec& prior, double h, bool finite_difference_score) {
  data.validate();
  prior.validate();
  if (prior.dim() != kLvDim) throw DimensionError("lv_target: prior must be 8-dimensional");
  if (finite_difference_score) {
    return target_from_log_density(kLvDim, [data, prior, h](const Point& x) {
      return lv_log_posterior(x, data, prior, h);
    });
  }
  TargetDensity t;
  t.dim = kLvDim;
  t.log_density = [data, prior, h](const Point& x) { return lv_log_posterior(x, data, prior, h); };
  t.log_density_and_score = [data, prior, h](const Point& x) -> std::pair<double, Eigen::VectorXd> {
    try {
      return lv_log_posterior_and_score(x, data, prior, h);
    } catch (const TrajectoryError&) {
      return {-std::numeric_limits<double>::infinity(), Eigen::VectorXd()};
    }
  };
  t.score = [data, prior, h](const Point& x) { return lv_score(x, data, prior, h); };
  return t;
}

}  // namespace mlcf
