#include "mlcf/sampling.hpp"

#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

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

}  // namespace

SobolTable SobolTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("SobolTable: cannot open " + path);
  SobolTable table;
  std::string line;
  std::size_t expected = 2;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::size_t d = 0;
    if (!(row >> d)) continue;  // header or blank
    if (d != expected) throw std::runtime_error("SobolTable: rows out of order at dimension " + std::to_string(d));
    Entry e;
    if (!(row >> e.degree >> e.coefficients)) throw std::runtime_error("SobolTable: malformed row " + line);
    if (e.degree == 0 || e.degree > 31) throw std::runtime_error("SobolTable: bad degree in row " + line);
    e.initial.resize(e.degree);
    for (unsigned k = 0; k < e.degree; ++k) {
      if (!(row >> e.initial[k])) throw std::runtime_error("SobolTable: missing m_i in row " + line);
      if (e.initial[k] % 2 == 0 || e.initial[k] >= (1u << (k + 1))) {
        throw std::runtime_error("SobolTable: invalid initial direction number in row " + line);
      }
    }
    table.entries_.push_back(std::move(e));
    ++expected;
  }
  return table;
}

const SobolTable& SobolTable::standard() {
  static std::once_flag once;
  static SobolTable table;
  std::call_once(once, [] { table = load(data_dir() + "/new-joe-kuo-6.21201.txt"); });
  return table;
}

SobolSequence::SobolSequence(const SobolTable& table, std::size_t dim) {
  if (dim == 0) throw DimensionError("SobolSequence: dimension must be positive");
  if (dim > table.max_dim()) {
    throw DimensionError("SobolSequence: dimension " + std::to_string(dim) + " exceeds supported maximum " +
                         std::to_string(table.max_dim()));
  }
  directions_.resize(dim);
  for (unsigned i = 0; i < 32; ++i) directions_[0][i] = 1u << (31 - i);
  for (std::size_t j = 1; j < dim; ++j) {
    const auto& e = table.entry(j);
    const unsigned s = e.degree;
    auto& v = directions_[j];
    for (unsigned i = 0; i < 32; ++i) {
      if (i < s) {
        v[i] = e.initial[i] << (31 - i);
      } else {
        std::uint32_t next = v[i - s] ^ (v[i - s] >> s);
        for (unsigned k = 1; k < s; ++k) {
          if ((e.coefficients >> (s - 1 - k)) & 1u) next ^= v[i - k];
        }
        v[i] = next;
      }
    }
  }
}

std::vector<std::uint32_t> SobolSequence::point_bits(std::uint64_t index) const {
  if (index >= (std::uint64_t{1} << 32)) throw std::out_of_range("SobolSequence: index beyond 2^32");
  const std::uint64_t gray = index ^ (index >> 1);
  std::vector<std::uint32_t> x(dim(), 0u);
  for (unsigned b = 0; b < 32; ++b) {
    if ((gray >> b) & 1u) {
      for (std::size_t j = 0; j < dim(); ++j) x[j] ^= directions_[j][b];
    }
  }
  return x;
}

Eigen::VectorXd SobolSequence::point(std::uint64_t index) const {
  const auto bits = point_bits(index);
  Eigen::VectorXd u(bits.size());
  for (std::size_t j = 0; j < bits.size(); ++j) u[static_cast<Eigen::Index>(j)] = std::ldexp(double(bits[j]), -32);
  return u;
}

std::vector<Eigen::VectorXd> sobol_unit_points(std::size_t dim, std::size_t n, std::size_t skip,
                                               std::optional<SeededStream> shift, const SobolTable& table) {
  if (n == 0) throw std::invalid_argument("sample_sobol: n must be positive");
  SobolSequence seq(table, dim);
  std::vector<std::uint32_t> mask(dim, 0u);
  if (shift) {
    auto rng = shift->engine();
    for (auto& m : mask) m = static_cast<std::uint32_t>(rng() >> 32);
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Index 0 (the origin) is never used, so the first point is (0.5, ..., 0.5).
    const auto bits = seq.point_bits(static_cast<std::uint64_t>(skip + i + 1));
    Eigen::VectorXd u(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = shift ? std::ldexp(double(bits[j] ^ mask[j]) + 0.5, -32) : std::ldexp(double(bits[j]), -32);
      u[static_cast<Eigen::Index>(j)] = v;
    }
    out.push_back(std::move(u));
  }
  return out;
}

PointSet sample_sobol(const GaussianSpec& spec, std::size_t n, std::size_t skip, std::optional<SeededStream> shift,
                      const SobolTable& table) {
  spec.validate();
  PointSet out;
  for (const auto& u : sobol_unit_points(static_cast<std::size_t>(spec.dim()), n, skip, shift, table)) {
    out.push_back(spec.from_unit(u));
  }
  return out;
}

}  // namespace mlcf
