#include "mlcf/sampling.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mlcf {

namespace {

// Proposal geometry y = x + (step^2/2) M score + step L xi,  M = L L'.
class Preconditioner {
 public:
  Preconditioner(const Eigen::MatrixXd& m, Eigen::Index dim) {
    if (m.size() == 0) {
      metric_ = Eigen::MatrixXd::Identity(dim, dim);
    } else {
      if (m.rows() != dim || m.cols() != dim) throw DimensionError("mcmc: preconditioner must be d x d");
      metric_ = m;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(metric_);
    if (llt.info() != Eigen::Success) throw std::invalid_argument("mcmc: preconditioner is not positive definite");
    factor_ = llt.matrixL();
  }

  Eigen::VectorXd drift(const Eigen::VectorXd& score) const { return metric_ * score; }
  Eigen::VectorXd noise(const Eigen::VectorXd& xi) const { return factor_ * xi; }
  // |L^-1 r|^2
  double whitened_norm2(const Eigen::VectorXd& r) const {
    return factor_.triangularView<Eigen::Lower>().solve(r).squaredNorm();
  }

 private:
  Eigen::MatrixXd metric_;
  Eigen::MatrixXd factor_;
};

double log_proposal(const Point& to, const Point& from, const Eigen::VectorXd& score_from, double step,
                    const Preconditioner& pre) {
  const Eigen::VectorXd mean = from + 0.5 * step * step * pre.drift(score_from);
  return -pre.whitened_norm2(to - mean) / (2.0 * step * step);
}

double log_ratio(const Point& x, double log_px, const Eigen::VectorXd& score_x, const Point& y, double log_py,
                 const Eigen::VectorXd& score_y, double step, const Preconditioner& pre) {
  return log_py - log_px + log_proposal(x, y, score_y, step, pre) - log_proposal(y, x, score_x, step, pre);
}

}  // namespace

double mala_log_ratio(const Point& x, double log_px, const Eigen::VectorXd& score_x, const Point& y, double log_py,
                      const Eigen::VectorXd& score_y, double step, const Eigen::MatrixXd& preconditioner) {
  require_same_dim(x, y, "mala_log_ratio");
  return log_ratio(x, log_px, score_x, y, log_py, score_y, step, Preconditioner(preconditioner, x.size()));
}

McmcResult mcmc_chain(const TargetDensity& target, const Point& init, const McmcOptions& opts, SeededStream stream) {
  if (!target.has_log_density()) throw std::invalid_argument("mcmc_chain: target has no log-density");
  if (init.size() != target.dim) throw DimensionError("mcmc_chain: init dimension mismatch");
  if (opts.n == 0) throw std::invalid_argument("mcmc_chain: n must be positive");
  if (!(opts.step_scale > 0.0)) throw std::invalid_argument("mcmc_chain: step_scale must be positive");
  const std::size_t thin = std::max<std::size_t>(1, opts.thin);
  const Preconditioner pre(opts.preconditioner, init.size());

  auto [lp, score] = target.log_density_and_score_at(init);
  if (!std::isfinite(lp)) throw EvaluationError("mcmc_chain: non-finite log-density at init " + format_point(init));
  if (score.size() != target.dim || !score.allFinite()) {
    throw EvaluationError("mcmc_chain: non-finite score at init " + format_point(init));
  }
  Point x = init;

  auto rng = stream.engine();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  double step = opts.step_scale;
  // dual averaging state
  const double mu = std::log(10.0 * opts.step_scale);
  const double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  double h_bar = 0.0, log_step_bar = 0.0;

  McmcResult out;
  out.states.reserve(opts.n);
  std::size_t accepted = 0, proposed = 0;
  const std::size_t total = opts.burn_in + opts.n * thin;
  Eigen::VectorXd xi(x.size());

  for (std::size_t it = 0; it < total; ++it) {
    for (Eigen::Index j = 0; j < xi.size(); ++j) xi[j] = normal(rng);
    Point y = x + 0.5 * step * step * pre.drift(score) + step * pre.noise(xi);
    double alpha = 0.0;
    double lp_y = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd score_y;
    try {
      auto [a, b] = target.log_density_and_score_at(y);
      lp_y = a;
      score_y = std::move(b);
    } catch (const EvaluationError&) {
      lp_y = -std::numeric_limits<double>::infinity();
    }
    const bool valid = std::isfinite(lp_y) && score_y.size() == x.size() && score_y.allFinite();
    if (valid) {
      const double log_r = log_ratio(x, lp, score, y, lp_y, score_y, step, pre);
      alpha = log_r >= 0.0 ? 1.0 : std::exp(log_r);
    }
    const bool accept = valid && unif(rng) < alpha;
    if (accept) {
      x = std::move(y);
      lp = lp_y;
      score = std::move(score_y);
    }

    if (it < opts.burn_in) {
      if (opts.adapt) {
        const double t = static_cast<double>(it + 1);
        h_bar = (1.0 - 1.0 / (t + t0)) * h_bar + (opts.target_acceptance - alpha) / (t + t0);
        const double log_step = mu - std::sqrt(t) / gamma * h_bar;
        const double eta = std::pow(t, -kappa);
        log_step_bar = eta * log_step + (1.0 - eta) * log_step_bar;
        step = std::exp(log_step);
        if (it + 1 == opts.burn_in) step = std::exp(log_step_bar);
      }
      continue;
    }
    ++proposed;
    if (accept) ++accepted;
    if ((it - opts.burn_in + 1) % thin == 0) {
      out.states.push_back(x);
      out.scores.push_back(score);
      out.log_densities.push_back(lp);
    }
  }
  out.acceptance_rate = proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
  out.step_size = step;
  out.acceptance_warning = out.acceptance_rate < 0.05 || out.acceptance_rate > 0.95;
  return out;
}

}  // namespace mlcf
