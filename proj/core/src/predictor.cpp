#include "probekit/predictor.hpp"

#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::LinearRegression: return "linear-regression";
    case ModelKind::LogisticRegression: return "logistic-regression";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::KernelSvm: return "kernel-svm";
    case ModelKind::DecisionTree: return "decision-tree";
    case ModelKind::RandomForest: return "random-forest";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::LinearRegression, ModelKind::LogisticRegression, ModelKind::Mlp, ModelKind::KernelSvm,
                 ModelKind::DecisionTree, ModelKind::RandomForest}) {
    if (to_string(k) == s) return k;
  }
  throw SpecError("unknown model kind '" + s + "'");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sum_exp(const Vector& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Vector softmax(const Vector& logits) {
  const Vector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

void Predictor::check_input(const Vector& x) const {
  if (x.size() != input_dim()) {
    throw PreconditionError("predictor: input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(input_dim()));
  }
}

double Predictor::predict(const Vector& x) const {
  if (!is_classifier()) return raw_output(x)[0];
  Eigen::Index best = 0;
  predict_proba(x).maxCoeff(&best);
  return static_cast<double>(best);
}

Vector Predictor::predict_proba(const Vector& x) const {
  if (!is_classifier()) throw ArityError("predict_proba: " + to_string(kind()) + " model is a regressor");
  return softmax(raw_output(x));
}

double Predictor::decision_value(const Vector& x) const {
  const Vector raw = raw_output(x);
  if (!is_classifier()) return raw[0];
  if (num_classes() != 2) throw ArityError("decision_value: defined for binary classifiers and regressors only");
  return raw[1] - raw[0];
}

Matrix Predictor::proba_jacobian(const Vector& x) const {
  if (!is_classifier()) throw ArityError("proba_jacobian: model is a regressor");
  const RawEvaluation raw = evaluate_raw(x, true);
  const Vector p = softmax(raw.value);
  // d softmax = (diag(p) - p p') d raw
  Matrix s = -p * p.transpose();
  s.diagonal() += p;
  return s * raw.jacobian;
}

Vector Predictor::input_gradient(const Vector& x, GradientTarget target) const {
  if (!differentiable()) {
    throw NotDifferentiableError("input_gradient: " + to_string(kind()) +
                                 " is piecewise constant; use the smoothed-gradient sampler");
  }
  const RawEvaluation raw = evaluate_raw(x, true);
  switch (target.kind) {
    case GradientTarget::Kind::Decision:
      if (!is_classifier()) return raw.jacobian.row(0).transpose();
      if (num_classes() != 2) throw ArityError("input_gradient: decision target needs a binary classifier");
      return (raw.jacobian.row(1) - raw.jacobian.row(0)).transpose();
    case GradientTarget::Kind::Logit:
      if (target.index < 0 || target.index >= raw.value.size()) throw ArityError("input_gradient: logit index");
      return raw.jacobian.row(target.index).transpose();
    case GradientTarget::Kind::Probability: {
      if (!is_classifier()) throw ArityError("input_gradient: probability target on a regressor");
      if (target.index < 0 || target.index >= num_classes()) throw ArityError("input_gradient: class index");
      const Vector p = softmax(raw.value);
      const int k = target.index;
      // d p_k = p_k (d raw_k - sum_j p_j d raw_j)
      return (p[k] * (raw.jacobian.row(k) - p.transpose() * raw.jacobian)).transpose();
    }
  }
  return {};
}

std::shared_ptr<const Predictor> Predictor::with_params(const ParamVector&) const {
  throw PreconditionError("with_params: " + to_string(kind()) + " has no flat parameter vector");
}

}  // namespace probekit
