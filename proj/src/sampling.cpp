#include "mlcf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mlcf {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

SeededStream SeededStream::child(std::uint64_t tag) const {
  return {seed, splitmix64(stream_id ^ splitmix64(tag + 0x632BE59BD9B4E019ULL))};
}

std::mt19937_64 SeededStream::engine() const {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

void GaussianSpec::validate() const {
  if (mean.size() == 0) throw DimensionError("GaussianSpec: empty mean");
  if (mean.size() != sd.size()) throw DimensionError("GaussianSpec: mean and sd lengths differ");
  if (!mean.allFinite() || !(sd.array() > 0.0).all() || !sd.allFinite()) {
    throw std::invalid_argument("GaussianSpec: sd must be positive and all entries finite");
  }
}

Point GaussianSpec::from_unit(const Eigen::VectorXd& u) const {
  if (u.size() != mean.size()) throw DimensionError("GaussianSpec::from_unit: dimension mismatch");
  Point x(u.size());
  for (Eigen::Index j = 0; j < u.size(); ++j) x[j] = mean[j] + sd[j] * normal_quantile(u[j]);
  return x;
}

PointSet sample_iid(const GaussianSpec& spec, std::size_t n, SeededStream stream) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("sample_iid: n must be positive");
  auto rng = stream.engine();
  std::normal_distribution<double> normal;
  PointSet out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point x(spec.dim());
    for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = spec.mean[j] + spec.sd[j] * normal(rng);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Eigen::VectorXd> lhs_unit_points(std::size_t dim, std::size_t n, SeededStream stream) {
  if (n == 0) throw std::invalid_argument("sample_lhs: n must be positive");
  if (dim == 0) throw DimensionError("sample_lhs: dimension must be positive");
  auto rng = stream.engine();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::VectorXd> out(n, Eigen::VectorXd(dim));
  std::vector<std::size_t> strata(n);
  for (std::size_t j = 0; j < dim; ++j) {
    std::iota(strata.begin(), strata.end(), std::size_t{0});
    std::shuffle(strata.begin(), strata.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      double u = (static_cast<double>(strata[i]) + unif(rng)) / static_cast<double>(n);
      // keep strictly inside (0,1) so the quantile stays finite
      u = std::clamp(u, 1e-300, std::nextafter(1.0, 0.0));
      out[i][static_cast<Eigen::Index>(j)] = u;
    }
  }
  return out;
}

PointSet sample_lhs(const GaussianSpec& spec, std::size_t n, SeededStream stream) {
  spec.validate();
  PointSet out;
  out.reserve(n);
  for (const auto& u : lhs_unit_points(static_cast<std::size_t>(spec.dim()), n, stream)) out.push_back(spec.from_unit(u));
  return out;
}

}  // namespace mlcf
