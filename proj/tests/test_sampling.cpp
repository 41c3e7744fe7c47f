#include "doctest.h"
#include "mlcf/sampling.hpp"
#include "support.hpp"

#include <boost/math/special_functions/erf.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <set>

using namespace mlcf;

namespace {

// Exact star discrepancy of a 2-d point set (corners restricted to point coordinates and 1).
double star_discrepancy_2d(const std::vector<Eigen::VectorXd>& pts) {
  std::vector<double> xs{1.0}, ys{1.0};
  for (const auto& p : pts) {
    xs.push_back(p[0]);
    ys.push_back(p[1]);
  }
  const double n = static_cast<double>(pts.size());
  double worst = 0.0;
  for (double a : xs) {
    for (double b : ys) {
      int open = 0, closed = 0;
      for (const auto& p : pts) {
        if (p[0] < a && p[1] < b) ++open;
        if (p[0] <= a && p[1] <= b) ++closed;
      }
      worst = std::max({worst, closed / n - a * b, a * b - open / n});
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("iid sampling") {
  const auto one = sample_iid(test::standard_normal(2), 1, {5, 0});
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 2);
  CHECK(one[0].allFinite());

  const auto many = sample_iid(test::standard_normal(1), 100000, {11, 3});
  std::vector<double> v;
  for (const auto& x : many) v.push_back(x[0]);
  CHECK(std::abs(test::mean(v)) < 0.02);
  CHECK(std::abs(test::sd(v) - 1.0) < 0.02);

  const GaussianSpec shifted{Eigen::Vector2d(3.0, -1.0), Eigen::Vector2d(0.5, 2.0)};
  std::vector<double> a, b;
  for (const auto& x : sample_iid(shifted, 100000, {2, 0})) {
    a.push_back(x[0]);
    b.push_back(x[1]);
  }
  CHECK(std::abs(test::mean(a) - 3.0) < 0.02);
  CHECK(std::abs(test::sd(b) - 2.0) < 0.04);

  const auto r1 = sample_iid(test::standard_normal(3), 50, {9, 4});
  const auto r2 = sample_iid(test::standard_normal(3), 50, {9, 4});
  const auto r3 = sample_iid(test::standard_normal(3), 50, {9, 5});
  for (std::size_t i = 0; i < 50; ++i) CHECK(r1[i] == r2[i]);
  CHECK(r1[0] != r3[0]);

  CHECK_THROWS(GaussianSpec{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)}.validate());
  CHECK_THROWS(sample_iid(GaussianSpec{Eigen::Vector2d(0, 0), Eigen::Vector2d(1, -1)}, 3, {1, 0}));
}

TEST_CASE("stream children are distinct and reproducible") {
  const SeededStream s(42, 7);
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  for (std::uint64_t t = 0; t < 64; ++t) {
    const auto c = s.child(t);
    seen.insert({c.seed, c.stream_id});
    CHECK(c.engine()() == s.child(t).engine()());
  }
  CHECK(seen.size() == 64);
  CHECK(SeededStream(42, 7).engine()() != SeededStream(42, 8).engine()());
}

TEST_CASE("sobol: published initial points") {
  const auto u = sobol_unit_points(2, 7, 0, std::nullopt, SobolTable::standard());
  const double expected[7][2] = {{0.5, 0.5},     {0.75, 0.25},   {0.25, 0.75},  {0.375, 0.375},
                                 {0.875, 0.875}, {0.625, 0.125}, {0.125, 0.625}};
  for (int i = 0; i < 7; ++i) {
    CHECK(u[i][0] == expected[i][0]);
    CHECK(u[i][1] == expected[i][1]);
  }
  const GaussianSpec spec{Eigen::Vector2d(1.0, -2.0), Eigen::Vector2d(0.3, 4.0)};
  const auto p = sample_sobol(spec, 1);
  CHECK(p[0][0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p[0][1] == doctest::Approx(-2.0).epsilon(1e-15));
  // skip drops leading points
  const auto skipped = sobol_unit_points(2, 2, 3, std::nullopt, SobolTable::standard());
  CHECK(skipped[0][0] == 0.375);
  CHECK(skipped[1][0] == 0.875);
}

TEST_CASE("sobol: each coordinate of the first 2^k points is a permutation of i / 2^k") {
  const SobolSequence seq(SobolTable::standard(), 8);
  for (int k : {4, 8}) {
    const std::uint64_t n = std::uint64_t{1} << k;
    for (std::size_t j = 0; j < seq.dim(); ++j) {
      std::set<std::uint32_t> seen;
      for (std::uint64_t i = 0; i < n; ++i) seen.insert(seq.point_bits(i)[j] >> (32 - k));
      CHECK(seen.size() == n);
    }
  }
  // Dimensions 1 and 2 together form a (0, m, 2)-net: one point per elementary box of area 2^-k.
  for (int a = 0; a <= 6; ++a) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> boxes;
    for (std::uint64_t i = 0; i < 64; ++i) {
      const auto p = seq.point_bits(i);
      boxes.insert({p[0] >> (32 - a), p[1] >> (32 - (6 - a))});
    }
    CHECK(boxes.size() == 64);
  }
}

TEST_CASE("sobol: lower star discrepancy than iid uniforms") {
  const auto sob = sobol_unit_points(2, 256, 0, std::nullopt, SobolTable::standard());
  const double d_sobol = star_discrepancy_2d(sob);
  std::vector<double> d_iid;
  for (std::uint64_t s = 0; s < 20; ++s) {
    std::mt19937_64 rng(1000 + s);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 256; ++i) pts.push_back(Eigen::Vector2d(u(rng), u(rng)));
    d_iid.push_back(star_discrepancy_2d(pts));
  }
  CHECK(d_sobol < test::median(d_iid));
}

TEST_CASE("sobol: quantile round trip and dimension limit") {
  const auto u = sobol_unit_points(4, 100, 0, SeededStream(3, 1), SobolTable::standard());
  const auto x = sample_sobol(test::standard_normal(4), 100, 0, SeededStream(3, 1));
  for (std::size_t i = 0; i < 100; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(std::abs(normal_cdf(x[i][j]) - u[i][j]) < 1e-10);
  }
  const std::size_t too_big = SobolTable::standard().max_dim() + 1;
  CHECK_THROWS(sobol_unit_points(too_big, 4, 0, std::nullopt, SobolTable::standard()));
}

TEST_CASE("latin hypercube stratification") {
  const auto four = lhs_unit_points(1, 4, {8, 0});
  std::vector<int> strata;
  for (const auto& u : four) strata.push_back(static_cast<int>(std::floor(u[0] * 4)));
  std::sort(strata.begin(), strata.end());
  CHECK(strata == std::vector<int>{0, 1, 2, 3});

  const std::size_t n = 50;
  const auto pts = lhs_unit_points(3, n, {8, 1});
  for (int j = 0; j < 3; ++j) {
    std::vector<int> counts(n, 0);
    for (const auto& u : pts) ++counts.at(static_cast<std::size_t>(std::floor(u[j] * n)));
    CHECK(std::all_of(counts.begin(), counts.end(), [](int c) { return c == 1; }));
  }
}

TEST_CASE("latin hypercube reduces the variance of the sample mean") {
  std::vector<double> m_lhs, m_iid;
  for (std::uint64_t s = 0; s < 200; ++s) {
    double a = 0.0, b = 0.0;
    for (const auto& x : sample_lhs(test::standard_normal(2), 1000, {77, s})) a += x[0];
    for (const auto& x : sample_iid(test::standard_normal(2), 1000, {78, s})) b += x[0];
    m_lhs.push_back(a / 1000);
    m_iid.push_back(b / 1000);
  }
  CHECK(test::sd(m_lhs) < test::sd(m_iid));
}

TEST_CASE("normal quantile against a 50-digit oracle") {
  using big = boost::multiprecision::cpp_bin_float_50;
  double worst = 0.0;
  std::vector<double> us{1e-12, 1e-10, 1e-6, 0.02425, 0.5, 0.97575, 1 - 1e-6, 1 - 1e-12};
  for (int i = 1; i < 2000; ++i) us.push_back(i / 2000.0);
  for (int e = 1; e <= 12; ++e) {
    for (double m : {1.0, 3.0, 7.0}) {
      us.push_back(m * std::pow(10.0, -e));
      us.push_back(1.0 - m * std::pow(10.0, -e));
    }
  }
  for (double u : us) {
    if (u < 1e-12 || u > 1 - 1e-12) continue;
    const big oracle = -boost::multiprecision::sqrt(big(2)) * boost::math::erfc_inv(big(2) * big(u));
    worst = std::max(worst, std::abs(normal_quantile(u) - static_cast<double>(oracle)));
  }
  CHECK(worst < 1e-9);
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(normal_quantile(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(normal_quantile(1.0) == std::numeric_limits<double>::infinity());
  CHECK_THROWS(normal_quantile(1.5));
}

TEST_CASE("MALA acceptance ratio: hand-computed 1-d move") {
  // Target N(0,1): log p = -x^2/2, score = -x.
  const double x = 0.3, y = -0.5, h = 0.8;
  Point px = Eigen::VectorXd::Constant(1, x), py = Eigen::VectorXd::Constant(1, y);
  const double fwd_mean = x + 0.5 * h * h * (-x), rev_mean = y + 0.5 * h * h * (-y);
  const double log_q_fwd = -(y - fwd_mean) * (y - fwd_mean) / (2 * h * h);
  const double log_q_rev = -(x - rev_mean) * (x - rev_mean) / (2 * h * h);
  const double expected = (-y * y / 2 + log_q_rev) - (-x * x / 2 + log_q_fwd);
  const double got = mala_log_ratio(px, -x * x / 2, -px, py, -y * y / 2, -py, h);
  CHECK(got == doctest::Approx(expected).epsilon(1e-14));
  // A preconditioner equal to the identity changes nothing.
  CHECK(mala_log_ratio(px, -x * x / 2, -px, py, -y * y / 2, -py, h, Eigen::MatrixXd::Identity(1, 1)) ==
        doctest::Approx(expected).epsilon(1e-14));
  // Proposal covariance c: drift (h^2/2) c s, variance h^2 c.
  const double c = 2.5;
  const double fm = x + 0.5 * h * h * c * (-x), rm = y + 0.5 * h * h * c * (-y);
  const double pre_expected =
      (-y * y / 2 - (x - rm) * (x - rm) / (2 * h * h * c)) - (-x * x / 2 - (y - fm) * (y - fm) / (2 * h * h * c));
  CHECK(mala_log_ratio(px, -x * x / 2, -px, py, -y * y / 2, -py, h, Eigen::MatrixXd::Constant(1, 1, c)) ==
        doctest::Approx(pre_expected).epsilon(1e-14));
}

TEST_CASE("MALA on a standard normal recovers its moments") {
  McmcOptions o;
  o.n = 100000;
  o.burn_in = 2000;
  const auto r = mcmc_chain(test::standard_normal(1).target(), Eigen::VectorXd::Constant(1, 2.0), o, {31, 0});
  REQUIRE(r.states.size() == o.n);
  REQUIRE(r.scores.size() == o.n);
  std::vector<double> v;
  for (const auto& x : r.states) v.push_back(x[0]);
  CHECK(std::abs(test::mean(v)) < 0.05);
  CHECK(test::sd(v) > 0.93);
  CHECK(test::sd(v) < 1.07);
  CHECK(r.acceptance_rate > 0.0);
  CHECK(r.acceptance_rate < 1.0);
  CHECK(!r.acceptance_warning);
  CHECK((r.scores[10] + r.states[10]).norm() < 1e-14);
}

TEST_CASE("MALA acceptance tends to one as the step vanishes") {
  McmcOptions o;
  o.n = 2000;
  o.burn_in = 0;
  o.adapt = false;
  const auto target = test::standard_normal(3).target();
  double prev = 0.0;
  for (double step : {0.5, 0.05, 0.005}) {
    o.step_scale = step;
    const auto r = mcmc_chain(target, Eigen::VectorXd::Zero(3), o, {4, 0});
    CHECK(r.acceptance_rate >= prev - 0.01);
    prev = r.acceptance_rate;
  }
  CHECK(prev > 0.99);
}

TEST_CASE("MALA occupancy of a two-mode mixture matches the target weights") {
  // 0.3 N(-1,1) + 0.7 N(1,1): P(x > 0) = 0.3 Phi(-1) + 0.7 Phi(1).
  TargetDensity t;
  t.dim = 1;
  auto comp = [](double x, double m) { return std::exp(-0.5 * (x - m) * (x - m)); };
  t.log_density = [comp](const Point& x) { return std::log(0.3 * comp(x[0], -1) + 0.7 * comp(x[0], 1)); };
  t.score = [comp](const Point& x) {
    const double a = 0.3 * comp(x[0], -1), b = 0.7 * comp(x[0], 1);
    return Eigen::VectorXd::Constant(1, (a * (-1 - x[0]) + b * (1 - x[0])) / (a + b)).eval();
  };
  const double expected = 0.3 * normal_cdf(-1.0) + 0.7 * normal_cdf(1.0);
  McmcOptions o;
  o.n = 200000;
  o.burn_in = 2000;
  const auto r = mcmc_chain(t, Eigen::VectorXd::Zero(1), o, {6, 0});
  double pos = 0.0;
  for (const auto& x : r.states) pos += x[0] > 0.0;
  CHECK(std::abs(pos / o.n - expected) < 0.02 * expected);
}

TEST_CASE("MALA with a dense preconditioner on a correlated Gaussian") {
  Eigen::Matrix2d cov;
  cov << 1.0, 0.95, 0.95, 1.0;
  const Eigen::Matrix2d prec = cov.inverse();
  TargetDensity t;
  t.dim = 2;
  t.log_density = [prec](const Point& x) { return -0.5 * x.dot(prec * x); };
  t.score = [prec](const Point& x) { return Eigen::VectorXd(-(prec * x)); };
  McmcOptions o;
  o.n = 40000;
  o.burn_in = 2000;
  o.preconditioner = cov;
  const auto r = mcmc_chain(t, Eigen::Vector2d(1, -1), o, {12, 0});
  Eigen::Matrix2d emp = Eigen::Matrix2d::Zero();
  for (const auto& x : r.states) emp += x * x.transpose();
  emp /= static_cast<double>(r.states.size());
  CHECK((emp - cov).cwiseAbs().maxCoeff() < 0.08);

  o.preconditioner = Eigen::Matrix3d::Identity();
  CHECK_THROWS(mcmc_chain(t, Eigen::Vector2d(0, 0), o, {12, 0}));
  Eigen::Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  o.preconditioner = indefinite;
  CHECK_THROWS(mcmc_chain(t, Eigen::Vector2d(0, 0), o, {12, 0}));
}

TEST_CASE("MALA errors and warnings") {
  TargetDensity t;
  t.dim = 1;
  t.log_density = [](const Point& x) { return x[0] > 5 ? -std::numeric_limits<double>::infinity() : -0.5 * x[0] * x[0]; };
  t.score = [](const Point& x) { return Eigen::VectorXd(-x); };
  McmcOptions o;
  o.n = 10;
  CHECK_THROWS(mcmc_chain(t, Eigen::VectorXd::Constant(1, 6.0), o, {1, 0}));

  // A huge fixed step is almost never accepted.
  o.n = 500;
  o.burn_in = 0;
  o.adapt = false;
  o.step_scale = 50.0;
  const auto r = mcmc_chain(test::standard_normal(1).target(), Eigen::VectorXd::Zero(1), o, {1, 0});
  CHECK(r.acceptance_warning);

  const auto a = mcmc_chain(test::standard_normal(1).target(), Eigen::VectorXd::Zero(1), o, {1, 0});
  for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i] == r.states[i]);
}
