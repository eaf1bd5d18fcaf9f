#include <doctest.h>

#include <cmath>

#include "hmmgmr/gaussian.hpp"
#include "test_support.hpp"

using namespace hmmgmr;
using test_support::Rng;

namespace {

// independent check: integrate exp(logpdf) over a wide 1-D grid (trapezoid)
double quadrature_mass(const GaussianComponent& g, int n_points = 200001) {
  const double sigma = std::sqrt(g.covariance(0, 0));
  const double lo = g.mean(0) - 40.0 * sigma;
  const double hi = g.mean(0) + 40.0 * sigma;
  const double h = (hi - lo) / (n_points - 1);
  CholeskyGaussian eval(g);
  double sum = 0.0;
  Eigen::VectorXd x(1);
  for (int i = 0; i < n_points; ++i) {
    x(0) = lo + h * i;
    const double density = std::exp(eval.logpdf(x));
    sum += (i == 0 || i == n_points - 1) ? 0.5 * density : density;
  }
  return sum * h;
}

}  // namespace

TEST_SUITE("gaussian") {

TEST_CASE("standard normal at its mode") {
  GaussianComponent g{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  CHECK(gaussian_logpdf(Eigen::VectorXd::Zero(1), g) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("two-dimensional mode value") {
  GaussianComponent g{Eigen::VectorXd::Ones(2), Eigen::MatrixXd::Identity(2, 2)};
  CHECK(gaussian_logpdf(Eigen::VectorXd::Ones(2), g) ==
        doctest::Approx(-std::log(2.0 * M_PI) * 1.0).epsilon(1e-12));
}

TEST_CASE("scalar density matches the closed form and normalizes") {
  GaussianComponent g{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Constant(1, 1, 4.0)};
  Eigen::VectorXd x(1);
  x << 2.0;
  // closed form evaluated by an independent route
  const double expected = -0.5 * std::log(2.0 * M_PI * 4.0) - 0.5 * (2.0 * 2.0) / 4.0;
  CHECK(gaussian_logpdf(x, g) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(quadrature_mass(g) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("density integrates to one for random scalar components") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    GaussianComponent g{Eigen::VectorXd::Constant(1, 5.0 * rng.normal()),
                        Eigen::MatrixXd::Constant(1, 1, 0.05 + 4.0 * rng.uniform01())};
    CHECK(std::abs(quadrature_mass(g) - 1.0) < 1e-6);
  }
}

TEST_CASE("non-positive-definite covariance is rejected") {
  GaussianComponent g{Eigen::VectorXd::Zero(2), Eigen::MatrixXd(2, 2)};
  g.covariance << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1
  CHECK_THROWS_AS(gaussian_logpdf(Eigen::VectorXd::Zero(2), g), NumericError);
  CHECK_THROWS_AS(validate_component(g, 2), DataError);
}

TEST_CASE("conditioning with a diagonal covariance is the marginal") {
  Rng rng(3);
  const auto schema = test_support::schema_for_dim(3);
  GaussianComponent g{Eigen::VectorXd(3), Eigen::MatrixXd::Zero(3, 3)};
  g.mean << 1.0, -2.0, 0.5;
  g.covariance.diagonal() << 2.0, 0.5, 1.5;
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::VectorXd x_in(2);
    x_in << 4.0 * rng.normal(), 4.0 * rng.normal();
    const auto [mu, cov] = condition_gaussian(g, schema, x_in);
    CHECK(mu(0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(cov(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  }
}

TEST_CASE("hand-computed bivariate conditional, checked against sampling") {
  const auto schema = test_support::schema_for_dim(2);
  GaussianComponent g{Eigen::VectorXd::Zero(2), Eigen::MatrixXd(2, 2)};
  g.covariance << 1.0, 0.5, 0.5, 1.0;
  Eigen::VectorXd x_in(1);
  x_in << 2.0;
  const auto [mu, cov] = condition_gaussian(g, schema, x_in);
  CHECK(mu(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cov(0, 0) == doctest::Approx(0.75).epsilon(1e-12));

  // empirical conditional mean of joint draws near x_in, within 3 standard errors
  Rng rng(99);
  Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
  const Eigen::MatrixXd chol = llt.matrixL();
  double sum = 0.0;
  double sum_sq = 0.0;
  long hits = 0;
  for (long i = 0; i < 1000000; ++i) {
    Eigen::VectorXd z(2);
    z << rng.normal(), rng.normal();
    const Eigen::VectorXd sample = chol * z;
    if (std::abs(sample(0) - 2.0) < 0.05) {
      sum += sample(1);
      sum_sq += sample(1) * sample(1);
      ++hits;
    }
  }
  REQUIRE(hits > 100);
  const double empirical_mean = sum / static_cast<double>(hits);
  const double empirical_var =
      sum_sq / static_cast<double>(hits) - empirical_mean * empirical_mean;
  const double standard_error = std::sqrt(empirical_var / static_cast<double>(hits));
  CHECK(std::abs(empirical_mean - mu(0)) < 3.0 * standard_error);
}

TEST_CASE("conditioning at the input mean returns the output mean exactly") {
  Rng rng(7);
  const auto schema = test_support::schema_for_dim(4);
  const auto g = test_support::random_component(rng, 4);
  Eigen::VectorXd x_in(3);
  for (int i = 0; i < 3; ++i) x_in(i) = g.mean(schema.input_indices()[static_cast<std::size_t>(i)]);
  const auto [mu, cov] = condition_gaussian(g, schema, x_in);
  for (int i = 0; i < schema.output_dim(); ++i)
    CHECK(mu(i) == g.mean(schema.output_indices()[static_cast<std::size_t>(i)]));
}

TEST_CASE("near-singular input block is reported") {
  const auto schema = test_support::schema_for_dim(3);
  GaussianComponent g{Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3)};
  g.covariance(0, 1) = g.covariance(1, 0) = 1.0 - 1e-14;
  CHECK_THROWS_AS(condition_gaussian(g, schema, Eigen::VectorXd::Zero(2)), NumericError);
}

TEST_CASE("conditional covariance is symmetric positive semidefinite") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 3 + rng.uniform_int(3);
    const auto schema = test_support::schema_for_dim(d);
    const auto g = test_support::random_component(rng, d);
    Eigen::VectorXd x_in(schema.input_dim());
    for (int i = 0; i < x_in.size(); ++i) x_in(i) = rng.normal();
    const auto [mu, cov] = condition_gaussian(g, schema, x_in);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigs(cov, Eigen::EigenvaluesOnly);
    CHECK(eigs.eigenvalues().minCoeff() > -1e-10);
  }
}

}  // TEST_SUITE
