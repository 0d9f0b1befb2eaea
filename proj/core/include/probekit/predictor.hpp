#pragma once

#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "probekit/types.hpp"

namespace probekit {

enum class ModelKind { LinearRegression, LogisticRegression, Mlp, KernelSvm, DecisionTree, RandomForest };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

/// Selects which scalar output input_gradient differentiates.
struct GradientTarget {
  enum class Kind { Decision, Probability, Logit };
  Kind kind = Kind::Decision;
  int index = 0;

  static GradientTarget decision() { return {Kind::Decision, 0}; }
  static GradientTarget probability(int k) { return {Kind::Probability, k}; }
  static GradientTarget logit(int k) { return {Kind::Logit, k}; }
};

/// Raw outputs and, when requested, their input Jacobian (rows = outputs).
struct RawEvaluation {
  Vector value;
  Matrix jacobian;
};

/// Uniform interface over every trained model. Classifiers expose raw
/// outputs as logits (binary models as (0, z)) so probabilities are
/// softmax(raw); regressors expose a single raw output equal to the
/// prediction. Tree models override the probability path directly and have
/// no raw Jacobian.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual ModelKind kind() const = 0;
  virtual int input_dim() const = 0;
  /// Number of classes; 0 for regressors.
  virtual int num_classes() const = 0;
  virtual bool differentiable() const = 0;

  bool is_classifier() const { return num_classes() > 0; }

  /// Regression value, or the arg-max class index for classifiers.
  double predict(const Vector& x) const;
  virtual Vector predict_proba(const Vector& x) const;
  /// Binary classifiers: logit-scale margin for class 1 (tree models: p1 - p0).
  /// Regressors: the prediction.
  virtual double decision_value(const Vector& x) const;

  /// Exact gradient of the selected output. Throws NotDifferentiableError for trees.
  Vector input_gradient(const Vector& x, GradientTarget target) const;

  Vector raw_output(const Vector& x) const { return evaluate_raw(x, false).value; }
  Matrix raw_jacobian(const Vector& x) const { return evaluate_raw(x, true).jacobian; }
  /// Jacobian of predict_proba, (K x d).
  Matrix proba_jacobian(const Vector& x) const;

  virtual RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const = 0;

  /// Flat trainable parameters; nullopt for tree models.
  virtual std::optional<ParamVector> params() const { return std::nullopt; }
  /// Same architecture with replaced parameters.
  virtual std::shared_ptr<const Predictor> with_params(const ParamVector& params) const;

  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_input(const Vector& x) const;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

/// Numerically stable softmax.
Vector softmax(const Vector& logits);
double log_sum_exp(const Vector& v);
double sigmoid(double z);

}  // namespace probekit
