#include "probekit/analytic_lr.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "probekit/errors.hpp"
#include "probekit/log.hpp"

namespace probekit {

namespace {

Matrix design_matrix(const Dataset& data) {
  const Matrix x = data.feature_matrix();
  Matrix d(x.rows(), x.cols() + 1);
  d.leftCols(x.cols()) = x;
  d.col(x.cols()).setOnes();
  return d;
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw PreconditionError("analytic lr: tau must be > 0");
}

void require_regression_data(const Dataset& data) {
  if (data.empty()) throw PreconditionError("analytic lr: empty dataset");
  if (!data.has_labels()) throw PreconditionError("analytic lr: dataset has no targets");
}

Vector ols(const Matrix& d, const Vector& y) {
  Eigen::ColPivHouseholderQR<Matrix> qr(d);
  qr.setThreshold(1e-10);
  if (qr.rank() < d.cols()) {
    throw SingularError("analytic lr: design matrix [X, 1] is rank deficient (rank " + std::to_string(qr.rank()) +
                        " of " + std::to_string(d.cols()) + ")");
  }
  return qr.solve(y);
}

// Cholesky of A, optionally jittered.
Eigen::LLT<Matrix> factor_a(Matrix a, const LrOptions& options) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() == Eigen::Success) return llt;
  if (!options.jitter) {
    throw SingularError("analytic lr: A = X'X/N - xbar xbar' is singular; retry with jitter (adds 1e-8 I)");
  }
  log().warn("analytic lr: A is singular, adding {} I", kLrJitter);
  a.diagonal().array() += kLrJitter;
  llt.compute(a);
  if (llt.info() != Eigen::Success) throw SingularError("analytic lr: A is singular even after jitter");
  return llt;
}

}  // namespace

std::string to_string(PosteriorSpace space) {
  return space == PosteriorSpace::Parameter ? "parameter-space" : "data-space";
}

Matrix GaussianPosterior::covariance() const {
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw SingularError("posterior: precision is not positive definite");
  return llt.solve(Matrix::Identity(precision.rows(), precision.cols()));
}

nlohmann::json GaussianPosterior::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < precision.rows(); ++i) {
    const Vector r = precision.row(i).transpose();
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return {{"mean", std::vector<double>(mean.begin(), mean.end())}, {"precision", rows}, {"space", to_string(space)}};
}

GaussianPosterior GaussianPosterior::from_json(const nlohmann::json& j) {
  GaussianPosterior g;
  const auto m = j.at("mean").get<std::vector<double>>();
  g.mean = Eigen::Map<const Vector>(m.data(), static_cast<Eigen::Index>(m.size()));
  const auto rows = j.at("precision").get<std::vector<std::vector<double>>>();
  g.precision.resize(static_cast<Eigen::Index>(rows.size()), g.mean.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.size()) throw IoError("posterior: precision is not square");
    for (std::size_t c = 0; c < rows[i].size(); ++c) g.precision(i, c) = rows[i][c];
  }
  const auto space = j.at("space").get<std::string>();
  if (space == "parameter-space") {
    g.space = PosteriorSpace::Parameter;
  } else if (space == "data-space") {
    g.space = PosteriorSpace::Data;
  } else {
    throw IoError("posterior: unknown space tag '" + space + "'");
  }
  return g;
}

LrSummary lr_summary(const Dataset& data) {
  require_regression_data(data);
  const Matrix x = data.feature_matrix();
  const Vector y = data.label_vector();
  const Vector theta = ols(design_matrix(data), y);
  const Eigen::Index d = x.cols();
  const double n = static_cast<double>(x.rows());

  LrSummary s;
  s.n = static_cast<long>(x.rows());
  s.xbar = x.colwise().mean().transpose();
  s.a = x.transpose() * x / n - s.xbar * s.xbar.transpose();
  s.xi_hat = theta.head(d);
  s.b_hat = theta[d];
  const Vector yhat = (x * s.xi_hat).array() + s.b_hat;
  s.mean_yhat = yhat.mean();
  const Vector yc = yhat.array() - s.mean_yhat;
  const Matrix xc = x.rowwise() - s.xbar.transpose();
  s.cov_xy = xc.transpose() * yc / n;
  s.var_yhat = yc.squaredNorm() / n;
  return s;
}

GaussianPosterior lr_parameter_posterior(const Dataset& data, double tau) {
  check_tau(tau);
  require_regression_data(data);
  const Matrix d = design_matrix(data);
  GaussianPosterior g;
  g.mean = ols(d, data.label_vector());
  g.precision = d.transpose() * d / (static_cast<double>(d.rows()) * tau);
  g.space = PosteriorSpace::Parameter;
  return g;
}

ProbeFunction lr_parameter_energy(const Dataset& data) {
  require_regression_data(data);
  const Matrix d = design_matrix(data);
  const Vector y = data.label_vector();
  const double n = static_cast<double>(d.rows());
  // ||D t - y||^2 / (2N) = t'(D'D/2N)t - (D'y/N)'t + y'y/2N
  return ProbeFunction({{1.0, std::make_shared<QuadraticTerm>(d.transpose() * d / (2.0 * n), -d.transpose() * y / n,
                                                              y.squaredNorm() / (2.0 * n), "lr-parameter-energy")}});
}

Matrix lr_data_quadratic_form(const Dataset& data, double tau, const LrOptions& options) {
  check_tau(tau);
  const LrSummary s = lr_summary(data);
  const auto llt = factor_a(s.a, options);
  const Eigen::Index d = s.xbar.size();
  Matrix p = tau * llt.solve(Matrix::Identity(d, d));
  p += s.xi_hat * s.xi_hat.transpose();
  return 0.5 * (p + p.transpose());
}

GaussianPosterior lr_data_posterior(const Dataset& data, double w, double tau, const LrOptions& options) {
  check_tau(tau);
  if (!std::isfinite(w)) throw PreconditionError("analytic lr: target output w must be finite");
  const LrSummary s = lr_summary(data);
  const auto a_llt = factor_a(s.a, options);
  const Eigen::Index d = s.xbar.size();

  Matrix p = tau * a_llt.solve(Matrix::Identity(d, d)) + s.xi_hat * s.xi_hat.transpose();
  p = 0.5 * (p + p.transpose());

  const Vector f_hat = s.xbar + s.cov_xy / (tau + s.var_yhat) * (w - s.mean_yhat);

  Eigen::LLT<Matrix> p_llt(p);
  if (p_llt.info() != Eigen::Success) throw SingularError("analytic lr: quadratic form is not positive definite");
  const Vector f_sm = p_llt.solve(tau * a_llt.solve(s.xbar) + s.xi_hat * (w - s.b_hat));
  const double scale = std::max(1.0, f_hat.cwiseAbs().maxCoeff());
  const double gap = (f_sm - f_hat).cwiseAbs().maxCoeff();
  if (!(gap <= 1e-8 * scale)) {
    throw SingularError("analytic lr: closed-form and Sherman-Morrison means disagree by " + std::to_string(gap));
  }

  GaussianPosterior g;
  g.mean = f_hat;
  g.precision = 2.0 * p / tau;
  g.space = PosteriorSpace::Data;
  return g;
}

ProbeFunction lr_data_energy(const Dataset& data, double w, double tau) {
  check_tau(tau);
  if (!std::isfinite(w)) throw PreconditionError("analytic lr: target output w must be finite");
  const GaussianPosterior q = lr_parameter_posterior(data, tau);
  const Eigen::Index d = q.mean.size() - 1;
  Matrix m = q.mean * q.mean.transpose() + q.covariance();
  m = 0.5 * (m + m.transpose());
  // z = (f, 1): z'Mz = f'M11 f + 2 m12'f + m22
  const Matrix m11 = m.topLeftCorner(d, d);
  const Vector m12 = m.topRightCorner(d, 1);
  const double m22 = m(d, d);
  const Vector linear = 2.0 * m12 - 2.0 * w * q.mean.head(d);
  const double constant = m22 - 2.0 * w * q.mean[d] + w * w;
  return ProbeFunction({{1.0, std::make_shared<QuadraticTerm>(m11, linear, constant, "lr-data-energy")}});
}

}  // namespace probekit
