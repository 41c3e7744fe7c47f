#pragma once

#include "mlcf/kernels.hpp"
#include "mlcf/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mlcf {

/// (seed, stream) pair; identical pairs reproduce identical draws on one platform.
struct SeededStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  /// Child stream for a sub-task (level, sampler kind, ...) of this stream.
  SeededStream child(std::uint64_t tag) const;
  std::mt19937_64 engine() const;
};

/// Independent Gaussian coordinates N(mean_i, sd_i^2).
struct GaussianSpec {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
  TargetDensity target() const { return diagonal_gaussian_target(mean, sd); }
  Point from_unit(const Eigen::VectorXd& u) const;
};

/// Standard normal CDF.
double normal_cdf(double x);
/// Standard normal quantile (Wichura's AS241, about 1e-16 relative accuracy).
double normal_quantile(double u);

PointSet sample_iid(const GaussianSpec& spec, std::size_t n, SeededStream stream);

/// Joe-Kuo direction numbers ("d s a m_i" rows; dimension 1 is implicit).
class SobolTable {
 public:
  struct Entry {
    unsigned degree = 0;
    std::uint32_t coefficients = 0;
    std::vector<std::uint32_t> initial;
  };

  static SobolTable load(const std::string& path);
  /// Table shipped in the data directory (MLCF_DATA_DIR, overridable by the environment variable of that name).
  static const SobolTable& standard();

  std::size_t max_dim() const { return entries_.size() + 1; }
  const Entry& entry(std::size_t dim_index) const { return entries_.at(dim_index - 1); }

 private:
  std::vector<Entry> entries_;
};

/// Gray-code Sobol generator in [0,1)^d with 32-bit resolution.
class SobolSequence {
 public:
  SobolSequence(const SobolTable& table, std::size_t dim);

  std::size_t dim() const { return directions_.size(); }
  /// Integer coordinates of the point with index `index` (index 0 is the origin).
  std::vector<std::uint32_t> point_bits(std::uint64_t index) const;
  Eigen::VectorXd point(std::uint64_t index) const;

 private:
  std::vector<std::array<std::uint32_t, 32>> directions_;
};

/// First n Sobol points after `skip`, starting at (0.5, ..., 0.5), mapped through
/// the normal quantile and the spec. When `shift` is set, a random digital shift
/// drawn from that stream randomizes the point set.
PointSet sample_sobol(const GaussianSpec& spec, std::size_t n, std::size_t skip = 0,
                      std::optional<SeededStream> shift = std::nullopt,
                      const SobolTable& table = SobolTable::standard());
std::vector<Eigen::VectorXd> sobol_unit_points(std::size_t dim, std::size_t n, std::size_t skip,
                                               std::optional<SeededStream> shift, const SobolTable& table);

/// Latin hypercube in [0,1)^d: one point per stratum in every coordinate.
std::vector<Eigen::VectorXd> lhs_unit_points(std::size_t dim, std::size_t n, SeededStream stream);
PointSet sample_lhs(const GaussianSpec& spec, std::size_t n, SeededStream stream);

struct McmcOptions {
  std::size_t n = 1000;
  std::size_t burn_in = 1000;
  double step_scale = 0.5;
  std::size_t thin = 1;
  bool adapt = true;  // dual averaging of the step during burn-in
  double target_acceptance = 0.574;
  /// Proposal covariance (symmetric positive definite, d x d); empty means identity.
  Eigen::MatrixXd preconditioner;
};

struct McmcResult {
  PointSet states;
  std::vector<Eigen::VectorXd> scores;
  std::vector<double> log_densities;
  double acceptance_rate = 0.0;  // post burn-in
  double step_size = 0.0;        // step used after burn-in
  bool acceptance_warning = false;
};

/// Log of the MALA acceptance ratio for a move x -> y.
double mala_log_ratio(const Point& x, double log_px, const Eigen::VectorXd& score_x, const Point& y, double log_py,
                      const Eigen::VectorXd& score_y, double step, const Eigen::MatrixXd& preconditioner = {});

/// Metropolis-adjusted Langevin chain.
McmcResult mcmc_chain(const TargetDensity& target, const Point& init, const McmcOptions& opts, SeededStream stream);

}  // namespace mlcf
