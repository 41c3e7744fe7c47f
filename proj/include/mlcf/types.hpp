#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlcf {

/// A location in the d-dimensional parameter space.
using Point = Eigen::VectorXd;
using PointSet = std::vector<Point>;

/// Scalar integrand f : R^d -> R.
using Integrand = std::function<double(const Point&)>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A user-supplied function (score, log-density, integrand) produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky of a (jittered) gram matrix failed at the largest allowed jitter.
class SingularGramError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require_same_dim(const Point& x, const Point& y, const char* where) {
  if (x.size() != y.size()) {
    throw DimensionError(std::string(where) + ": dimension mismatch (" + std::to_string(x.size()) +
                         " vs " + std::to_string(y.size()) + ")");
  }
}

std::string format_point(const Point& x);

}  // namespace mlcf
