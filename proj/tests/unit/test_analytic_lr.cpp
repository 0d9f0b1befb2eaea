#include <doctest.h>

#include <cmath>
#include <random>

#include <oracles.hpp>
#include <probekit/analytic_lr.hpp>
#include <probekit/datasets.hpp>
#include <probekit/errors.hpp>

using namespace probekit;

namespace {

Matrix fd_hessian(const ProbeFunction& g, const Vector& x, double h = 1e-4) {
  const Eigen::Index d = x.size();
  Matrix hess(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      Vector pp = x, pm = x, mp = x, mm = x;
      pp[i] += h, pp[j] += h;
      pm[i] += h, pm[j] -= h;
      mp[i] -= h, mp[j] += h;
      mm[i] -= h, mm[j] -= h;
      hess(i, j) = (g(pp) - g(pm) - g(mp) + g(mm)) / (4 * h * h);
    }
  }
  return hess;
}

}  // namespace

TEST_CASE("parameter posterior spread grows as the square root of temperature") {
  const Dataset d = linear_gaussian(300, 3, 0.5, 2);
  const Vector s1 = lr_parameter_posterior(d, 1.0).covariance().diagonal().cwiseSqrt();
  const Vector s6 = lr_parameter_posterior(d, 1e6).covariance().diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < s1.size(); ++i) CHECK(s6[i] / s1[i] == doctest::Approx(1e3).epsilon(1e-9));
}

TEST_CASE("two-point parameter posterior by hand") {
  Matrix x(2, 1);
  x << -1, 1;
  const Vector y = x.col(0);
  const GaussianPosterior q = lr_parameter_posterior(Dataset::from_matrix(x, y), 1.0);
  CHECK(q.mean[0] == doctest::Approx(1.0));
  CHECK(std::abs(q.mean[1]) < 1e-12);
  // D'D = diag(2, 2), N = 2, tau = 1
  CHECK((q.precision - Matrix::Identity(2, 2)).norm() < 1e-12);
  CHECK(q.space == PosteriorSpace::Parameter);
}

TEST_CASE("target at the mean prediction keeps the feature mean") {
  const Dataset d = linear_gaussian(500, 4, 0.5, 3);
  const LrSummary s = lr_summary(d);
  const GaussianPosterior q = lr_data_posterior(d, s.mean_yhat, 0.5);
  CHECK((q.mean - s.xbar).norm() < 1e-12);
}

TEST_CASE("unit shift moves the mean by the feature-prediction covariance") {
  const Dataset d = linear_gaussian(500, 4, 0.5, 4);
  const LrSummary s = lr_summary(d);
  const double tau = 0.7;
  const GaussianPosterior q = lr_data_posterior(d, s.mean_yhat + tau + s.var_yhat, tau);
  CHECK((q.mean - (s.xbar + s.cov_xy)).norm() < 1e-10);
}

TEST_CASE("data posterior matches the independent closed form") {
  const Dataset d = linear_gaussian(400, 3, 0.5, 5);
  const double w = 1.7, tau = 0.4;
  const GaussianPosterior q = lr_data_posterior(d, w, tau);
  const oracle::LrGaussian ref = oracle::lr_gaussian(d.feature_matrix(), d.label_vector(), w, tau);
  CHECK((q.mean - ref.mean).norm() < 1e-9);
  CHECK((q.covariance() - ref.cov).norm() / ref.cov.norm() < 1e-9);
  CHECK(q.space == PosteriorSpace::Data);
  const GaussianPosterior back = GaussianPosterior::from_json(q.to_json());
  CHECK(back.mean == q.mean);
  CHECK(back.precision == q.precision);
}

TEST_CASE("data energy is stationary at the posterior mean with Hessian twice the quadratic form") {
  const Dataset d = linear_gaussian(300, 3, 0.5, 6);
  const double w = 2.0, tau = 0.5;
  const ProbeFunction g = lr_data_energy(d, w, tau);
  const GaussianPosterior q = lr_data_posterior(d, w, tau);
  CHECK(g.gradient(q.mean).norm() < 1e-9);
  const Matrix p = lr_data_quadratic_form(d, tau);
  CHECK((fd_hessian(g, q.mean) - 2.0 * p).norm() / p.norm() < 1e-5);
  CHECK((2.0 * p / tau - q.precision).norm() / q.precision.norm() < 1e-12);
}

TEST_CASE("data energy equals its expectation over the parameter posterior") {
  const Dataset d = linear_gaussian(200, 2, 0.5, 7);
  const double w = 1.0, tau = 0.8;
  const ProbeFunction g = lr_data_energy(d, w, tau);
  const GaussianPosterior q = lr_parameter_posterior(d, tau);
  const Eigen::LLT<Matrix> chol(q.covariance());
  const Matrix l = chol.matrixL();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n01;
  Vector f(2);
  f << 0.4, -1.1;
  Vector z(3);
  z << f, 1.0;
  const int m = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < m; ++i) {
    Vector e(3);
    for (int k = 0; k < 3; ++k) e[k] = n01(rng);
    const double r = z.dot(q.mean + l * e) - w;
    sum += r * r;
    sum2 += r * r * r * r;
  }
  const double mean = sum / m;
  const double se = std::sqrt((sum2 / m - mean * mean) / m);
  CHECK(std::abs(g(f) - mean) < 4.0 * se);
}

TEST_CASE("parameter energy is minimal at the least-squares fit") {
  const Dataset d = linear_gaussian(200, 2, 0.5, 8);
  const GaussianPosterior q = lr_parameter_posterior(d, 1.0);
  CHECK(lr_parameter_energy(d).gradient(q.mean).norm() < 1e-9);
}

TEST_CASE("rank-deficient data is singular unless jittered") {
  Matrix x(4, 2);
  x << 1, 2, 2, 4, 3, 6, 4, 8;
  Vector y(4);
  y << 1, 2, 3, 5;
  const Dataset d = Dataset::from_matrix(x, y);
  CHECK_THROWS_AS(lr_summary(d), SingularError);
  CHECK_THROWS_AS(lr_parameter_posterior(d, 1.0), SingularError);
}
