#pragma once

#include <memory>
#include <vector>

#include "probekit/predictor.hpp"

namespace probekit {

/// Affine input normalisation u = (x - mean) / scale applied before a model.
struct InputScaler {
  Vector mean;
  Vector scale;

  static InputScaler identity(int d);
  static InputScaler fit(const Dataset& data);
  Vector apply(const Vector& x) const { return (x - mean).cwiseQuotient(scale); }
};

/// y = coef' x + intercept, fitted by ordinary least squares.
class LinearRegression final : public Predictor {
 public:
  LinearRegression(Vector coef, double intercept);

  ModelKind kind() const override { return ModelKind::LinearRegression; }
  int input_dim() const override { return static_cast<int>(coef_.size()); }
  int num_classes() const override { return 0; }
  bool differentiable() const override { return true; }

  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  std::optional<ParamVector> params() const override;
  std::shared_ptr<const Predictor> with_params(const ParamVector& params) const override;
  nlohmann::json to_json() const override;

  const Vector& coef() const { return coef_; }
  double intercept() const { return intercept_; }

 private:
  Vector coef_;
  double intercept_;
};

/// Throws SingularError when [X 1] is rank deficient.
std::shared_ptr<const LinearRegression> fit_linear_regression(const Dataset& data);

struct LogisticOptions {
  double l2 = 0.0;
  int steps = 2000;
  double learning_rate = 0.5;
  bool standardize = true;
};

/// Binary logistic regression; logit z = w' u + b on scaled inputs u.
class LogisticRegression final : public Predictor {
 public:
  LogisticRegression(Vector weights, double bias, InputScaler scaler);

  ModelKind kind() const override { return ModelKind::LogisticRegression; }
  int input_dim() const override { return static_cast<int>(weights_.size()); }
  int num_classes() const override { return 2; }
  bool differentiable() const override { return true; }

  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  std::optional<ParamVector> params() const override;
  std::shared_ptr<const Predictor> with_params(const ParamVector& params) const override;
  nlohmann::json to_json() const override;

  const Vector& weights() const { return weights_; }
  double bias() const { return bias_; }
  const InputScaler& scaler() const { return scaler_; }
  /// Weights expressed on raw (unscaled) inputs.
  Vector raw_space_weights() const { return weights_.cwiseQuotient(scaler_.scale); }

  /// Gradient norm of the regularised objective at the returned parameters
  /// and the loss recorded every 10 steps.
  double final_gradient_norm = 0.0;
  std::vector<double> loss_trace;

 private:
  Vector weights_;
  double bias_;
  InputScaler scaler_;
};

/// Full-batch gradient descent on the mean negative log-likelihood plus
/// (l2/2)||w||^2. Labels must be binary; throws ArityError otherwise.
std::shared_ptr<const LogisticRegression> fit_logistic_regression(const Dataset& data,
                                                                  const LogisticOptions& options = {});

}  // namespace probekit
