#include "probekit/linear_models.hpp"

#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {

InputScaler InputScaler::identity(int d) { return {Vector::Zero(d), Vector::Ones(d)}; }

InputScaler InputScaler::fit(const Dataset& data) {
  InputScaler s{data.feature_mean(), data.feature_std()};
  for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
    if (!(s.scale[j] > 1e-12)) s.scale[j] = 1.0;  // constant column
  }
  return s;
}

LinearRegression::LinearRegression(Vector coef, double intercept) : coef_(std::move(coef)), intercept_(intercept) {}

RawEvaluation LinearRegression::evaluate_raw(const Vector& x, bool with_jacobian) const {
  check_input(x);
  RawEvaluation r;
  r.value = Vector::Constant(1, coef_.dot(x) + intercept_);
  if (with_jacobian) r.jacobian = coef_.transpose();
  return r;
}

std::optional<ParamVector> LinearRegression::params() const {
  const int d = input_dim();
  Vector theta(d + 1);
  theta << coef_, intercept_;
  return ParamVector(std::move(theta), {{"coef", 0, d}, {"intercept", d, 1}});
}

std::shared_ptr<const Predictor> LinearRegression::with_params(const ParamVector& params) const {
  if (params.size() != input_dim() + 1) throw PreconditionError("linear regression: parameter length");
  return std::make_shared<LinearRegression>(params.theta().head(input_dim()), params.theta()[input_dim()]);
}

nlohmann::json LinearRegression::to_json() const {
  return {{"kind", to_string(kind())},
          {"input_dim", input_dim()},
          {"coef", std::vector<double>(coef_.data(), coef_.data() + coef_.size())},
          {"intercept", intercept_}};
}

std::shared_ptr<const LinearRegression> fit_linear_regression(const Dataset& data) {
  if (!data.has_labels()) throw PreconditionError("fit_linear_regression: dataset needs labels");
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const int d = data.dimension();
  Matrix design(n, d + 1);
  design.leftCols(d) = data.feature_matrix();
  design.col(d).setOnes();
  const Vector y = data.label_vector();

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < d + 1) {
    throw SingularError("fit_linear_regression: design matrix [X 1] has rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(d + 1));
  }
  const Vector theta = qr.solve(y);
  return std::make_shared<LinearRegression>(theta.head(d), theta[d]);
}

LogisticRegression::LogisticRegression(Vector weights, double bias, InputScaler scaler)
    : weights_(std::move(weights)), bias_(bias), scaler_(std::move(scaler)) {
  if (scaler_.mean.size() != weights_.size() || scaler_.scale.size() != weights_.size()) {
    throw PreconditionError("logistic regression: scaler dimension");
  }
}

RawEvaluation LogisticRegression::evaluate_raw(const Vector& x, bool with_jacobian) const {
  check_input(x);
  RawEvaluation r;
  r.value = Vector::Zero(2);
  r.value[1] = weights_.dot(scaler_.apply(x)) + bias_;
  if (with_jacobian) {
    r.jacobian = Matrix::Zero(2, input_dim());
    r.jacobian.row(1) = raw_space_weights().transpose();
  }
  return r;
}

std::optional<ParamVector> LogisticRegression::params() const {
  const int d = input_dim();
  Vector theta(d + 1);
  theta << weights_, bias_;
  return ParamVector(std::move(theta), {{"weights", 0, d}, {"bias", d, 1}});
}

std::shared_ptr<const Predictor> LogisticRegression::with_params(const ParamVector& params) const {
  if (params.size() != input_dim() + 1) throw PreconditionError("logistic regression: parameter length");
  return std::make_shared<LogisticRegression>(params.theta().head(input_dim()), params.theta()[input_dim()],
                                              scaler_);
}

namespace {
std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
}  // namespace

nlohmann::json LogisticRegression::to_json() const {
  return {{"kind", to_string(kind())},
          {"input_dim", input_dim()},
          {"weights", to_std(weights_)},
          {"bias", bias_},
          {"scaler", {{"mean", to_std(scaler_.mean)}, {"scale", to_std(scaler_.scale)}}}};
}

std::shared_ptr<const LogisticRegression> fit_logistic_regression(const Dataset& data,
                                                                  const LogisticOptions& options) {
  if (options.l2 < 0 || options.steps < 0 || !(options.learning_rate > 0)) {
    throw PreconditionError("fit_logistic_regression: need l2 >= 0, steps >= 0, learning_rate > 0");
  }
  if (data.num_classes() != 2) {
    throw ArityError("fit_logistic_regression: labels must be binary, dataset has " +
                     std::to_string(data.num_classes()) + " classes");
  }
  const int d = data.dimension();
  const InputScaler scaler = options.standardize ? InputScaler::fit(data) : InputScaler::identity(d);
  Matrix u = data.feature_matrix();
  u = (u.rowwise() - scaler.mean.transpose()).array().rowwise() / scaler.scale.transpose().array();
  const Vector y = data.label_vector();
  const double n = static_cast<double>(data.size());

  Vector w = Vector::Zero(d);
  double b = 0.0;
  std::vector<double> trace;
  auto objective_and_gradient = [&](Vector& gw, double& gb) {
    const Vector z = (u * w).array() + b;
    double loss = 0.0;
    Vector resid(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      // log(1 + e^z) - y z, computed stably
      loss += (z[i] > 0 ? z[i] + std::log1p(std::exp(-z[i])) : std::log1p(std::exp(z[i]))) - y[i] * z[i];
      resid[i] = sigmoid(z[i]) - y[i];
    }
    gw = u.transpose() * resid / n + options.l2 * w;
    gb = resid.mean();
    return loss / n + 0.5 * options.l2 * w.squaredNorm();
  };

  Vector gw(d);
  double gb = 0.0;
  for (int step = 0; step < options.steps; ++step) {
    const double loss = objective_and_gradient(gw, gb);
    if (!std::isfinite(loss)) throw TrainingDivergedError("logistic regression diverged", step);
    if (step % 10 == 0) trace.push_back(loss);
    // Explicit step on the likelihood, implicit (proximal) step on the l2 term
    // so large penalties stay stable: w <- (w - lr * grad_nll) / (1 + lr * l2).
    const Vector grad_nll = gw - options.l2 * w;
    w = (w - options.learning_rate * grad_nll) / (1.0 + options.learning_rate * options.l2);
    b -= options.learning_rate * gb;
  }
  const double final_loss = objective_and_gradient(gw, gb);
  trace.push_back(final_loss);

  auto model = std::make_shared<LogisticRegression>(w, b, scaler);
  model->final_gradient_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  model->loss_trace = std::move(trace);
  return model;
}

}  // namespace probekit
