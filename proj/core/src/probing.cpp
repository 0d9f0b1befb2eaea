#include "probekit/probing.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

void require_same_dim(const std::vector<PredictorPtr>& models, const PredictorPtr& ref, const char* who) {
  for (const auto& m : models) {
    if (!m) throw PreconditionError(std::string(who) + ": null model");
    if (ref && m->input_dim() != ref->input_dim()) {
      throw PreconditionError(std::string(who) + ": models disagree on input dimension");
    }
  }
}

bool all_differentiable(const std::vector<PredictorPtr>& models) {
  return std::all_of(models.begin(), models.end(), [](const PredictorPtr& m) { return m->differentiable(); });
}

// Output vector used by the exp-form similarity: prediction for regressors,
// probabilities for classifiers.
Vector similarity_output(const Predictor& m, const Vector& x) {
  if (m.is_classifier()) return m.predict_proba(x);
  return m.raw_output(x);
}

Matrix similarity_jacobian(const Predictor& m, const Vector& x) {
  if (m.is_classifier()) return m.proba_jacobian(x);
  return m.raw_jacobian(x);
}

ProbeFunction with_reg(ProbeFunction g, std::optional<Regularizer> reg) {
  if (reg && reg->lambda() != 0.0) {
    if (reg->input_dim() != g.input_dim()) throw PreconditionError("regularizer anchor dimension mismatch");
    return g.with_term(std::make_shared<Regularizer>(std::move(*reg)), 1.0);
  }
  return g;
}

}  // namespace

std::string to_string(GradientMode mode) {
  switch (mode) {
    case GradientMode::Exact: return "exact";
    case GradientMode::Smoothed: return "smoothed";
    case GradientMode::None: return "none";
  }
  return "unknown";
}

GradientMode gradient_mode_from_string(const std::string& s) {
  if (s == "exact") return GradientMode::Exact;
  if (s == "smoothed") return GradientMode::Smoothed;
  if (s == "none") return GradientMode::None;
  throw SpecError("unknown gradient mode '" + s + "'");
}

Vector EnergyTerm::gradient(const Vector&) const {
  throw NotDifferentiableError("energy term '" + name() + "' has no gradient");
}

// ---------------------------------------------------------------------------

ProbeFunction::ProbeFunction(std::vector<WeightedTerm> terms) : terms_(std::move(terms)) {
  int dim = -1;
  for (const auto& t : terms_) {
    if (!t.term) throw PreconditionError("ProbeFunction: null term");
    if (!std::isfinite(t.weight)) throw PreconditionError("ProbeFunction: non-finite term weight");
    const int d = t.term->input_dim();
    if (d < 0) continue;
    if (dim >= 0 && d != dim) throw PreconditionError("ProbeFunction: terms disagree on input dimension");
    dim = d;
  }
}

ProbeFunction ProbeFunction::with_term(TermPtr term, double weight) const {
  auto terms = terms_;
  terms.push_back({weight, std::move(term)});
  return ProbeFunction(std::move(terms));
}

double ProbeFunction::evaluate(const Vector& x) const {
  double total = 0.0;
  for (const auto& t : terms_) total += t.weight * t.term->value(x);
  return total;
}

Vector ProbeFunction::gradient(const Vector& x) const {
  Vector g = Vector::Zero(x.size());
  for (const auto& t : terms_) {
    if (!t.term->differentiable()) {
      throw NotDifferentiableError("ProbeFunction: term '" + t.term->name() + "' is not differentiable");
    }
    g += t.weight * t.term->gradient(x);
  }
  return g;
}

std::vector<double> ProbeFunction::term_values(const Vector& x) const {
  std::vector<double> out;
  out.reserve(terms_.size());
  for (const auto& t : terms_) out.push_back(t.weight * t.term->value(x));
  return out;
}

bool ProbeFunction::differentiable() const {
  return std::all_of(terms_.begin(), terms_.end(), [](const WeightedTerm& t) { return t.term->differentiable(); });
}

int ProbeFunction::input_dim() const {
  for (const auto& t : terms_) {
    if (t.term->input_dim() >= 0) return t.term->input_dim();
  }
  return -1;
}

// ---------------------------------------------------------------------------

Regularizer::Regularizer(Vector anchor, double lambda, double r, std::optional<Vector> weights)
    : anchor_(std::move(anchor)), lambda_(lambda), r_(r) {
  if (!(lambda_ >= 0.0)) throw PreconditionError("Regularizer: lambda must be >= 0");
  if (!(r_ >= 1.0)) throw PreconditionError("Regularizer: order r must be >= 1");
  weights_ = weights ? std::move(*weights) : Vector::Ones(anchor_.size());
  if (weights_.size() != anchor_.size()) throw PreconditionError("Regularizer: weights and anchor differ in size");
  if ((weights_.array() < 0.0).any()) throw PreconditionError("Regularizer: weights must be >= 0");
}

double Regularizer::value(const Vector& x) const {
  const Eigen::ArrayXd diff = (x - anchor_).array().abs();
  return lambda_ * (weights_.array() * diff.pow(r_)).sum();
}

Vector Regularizer::gradient(const Vector& x) const {
  const Eigen::ArrayXd diff = (x - anchor_).array();
  // r = 1 uses sign(0) = 0 at the kink.
  const Eigen::ArrayXd mag = r_ == 1.0 ? Eigen::ArrayXd::Ones(diff.size()).eval() : diff.abs().pow(r_ - 1.0).eval();
  return (lambda_ * r_ * weights_.array() * diff.sign() * mag).matrix();
}

// ---------------------------------------------------------------------------

std::vector<PredictorPtr> ParamEnsemble::members(const Predictor& family) const {
  std::vector<PredictorPtr> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(family.with_params(s));
  return out;
}

// ---------------------------------------------------------------------------

LabelLossTerm::LabelLossTerm(std::vector<PredictorPtr> models, double target)
    : models_(std::move(models)), target_(target) {
  if (models_.empty()) throw PreconditionError("label loss: no models");
  require_same_dim(models_, models_.front(), "label loss");
  const bool cls = models_.front()->is_classifier();
  for (const auto& m : models_) {
    if (m->is_classifier() != cls || m->num_classes() != models_.front()->num_classes()) {
      throw ArityError("label loss: models disagree on output arity");
    }
  }
  if (cls) {
    const int k = models_.front()->num_classes();
    if (target_ != std::floor(target_) || target_ < 0 || target_ >= k) {
      throw ArityError("label loss: target label must be a class index in [0, " + std::to_string(k) + ")");
    }
  } else if (!std::isfinite(target_)) {
    throw PreconditionError("label loss: target value must be finite");
  }
}

bool LabelLossTerm::differentiable() const { return all_differentiable(models_); }

double LabelLossTerm::value(const Vector& x) const {
  double total = 0.0;
  const int y = static_cast<int>(target_);
  for (const auto& m : models_) {
    if (!m->is_classifier()) {
      const double e = m->raw_output(x)[0] - target_;
      total += e * e;
    } else if (m->differentiable()) {
      const Vector raw = m->raw_output(x);
      total += log_sum_exp(raw) - raw[y];
    } else {
      total += -std::log(std::max(m->predict_proba(x)[y], kProbFloor));
    }
  }
  return total / static_cast<double>(models_.size());
}

Vector LabelLossTerm::gradient(const Vector& x) const {
  if (!differentiable()) throw NotDifferentiableError("label loss: ensemble contains a tree model");
  Vector g = Vector::Zero(x.size());
  const int y = static_cast<int>(target_);
  for (const auto& m : models_) {
    const RawEvaluation raw = m->evaluate_raw(x, true);
    if (!m->is_classifier()) {
      g += 2.0 * (raw.value[0] - target_) * raw.jacobian.row(0).transpose();
    } else {
      const Vector p = softmax(raw.value);
      g += (raw.jacobian.transpose() * p) - raw.jacobian.row(y).transpose();
    }
  }
  return g / static_cast<double>(models_.size());
}

// ---------------------------------------------------------------------------

ContrastTerm::ContrastTerm(std::vector<PredictorPtr> models, PredictorPtr reference, ContrastTarget target)
    : models_(std::move(models)), reference_(std::move(reference)), target_(target) {
  if (!reference_) throw PreconditionError("contrast: null reference model");
  if (models_.empty()) throw PreconditionError("contrast: no models");
  require_same_dim(models_, reference_, "contrast");
  if (reference_->num_classes() != 2) throw ArityError("contrast: cross-entropy form needs binary classifiers");
  for (const auto& m : models_) {
    if (m->num_classes() != 2) throw ArityError("contrast: cross-entropy form needs binary classifiers");
  }
}

bool ContrastTerm::differentiable() const {
  // Hard targets and tree references are locally constant, so they add nothing.
  return all_differentiable(models_);
}

double ContrastTerm::flipped_target(const Vector& x) const {
  if (target_ == ContrastTarget::Hard) return 1.0 - reference_->predict(x);
  return 1.0 - reference_->predict_proba(x)[1];
}

double ContrastTerm::value(const Vector& x) const {
  const double t = flipped_target(x);
  double total = 0.0;
  for (const auto& m : models_) {
    double log_q = 0.0;
    double log_1mq = 0.0;
    if (m->differentiable()) {
      const double z = m->decision_value(x);
      // log sigmoid(z) = -softplus(-z)
      log_q = -std::log1p(std::exp(-std::abs(z))) - std::max(-z, 0.0);
      log_1mq = -std::log1p(std::exp(-std::abs(z))) - std::max(z, 0.0);
    } else {
      const double q = clamp_prob(m->predict_proba(x)[1]);
      log_q = std::log(q);
      log_1mq = std::log1p(-q);
    }
    total += -(t * log_q + (1.0 - t) * log_1mq);
  }
  return total / static_cast<double>(models_.size());
}

Vector ContrastTerm::gradient(const Vector& x) const {
  if (!differentiable()) throw NotDifferentiableError("contrast: a contrasted model is a tree");
  const bool soft_ref = target_ == ContrastTarget::Soft && reference_->differentiable();
  const double t = flipped_target(x);
  const Vector grad_ref = soft_ref ? reference_->input_gradient(x, GradientTarget::probability(1))
                                   : Vector::Zero(x.size());
  Vector g = Vector::Zero(x.size());
  for (const auto& m : models_) {
    const RawEvaluation raw = m->evaluate_raw(x, true);
    const double z = raw.value[1] - raw.value[0];
    const Vector grad_z = (raw.jacobian.row(1) - raw.jacobian.row(0)).transpose();
    // dCE/dz = q - t and dCE/dt = -z, with dt = -d p_ref.
    g += (sigmoid(z) - t) * grad_z + z * grad_ref;
  }
  return g / static_cast<double>(models_.size());
}

// ---------------------------------------------------------------------------

OutputSimilarityTerm::OutputSimilarityTerm(std::vector<PredictorPtr> models, PredictorPtr reference, double sigma)
    : models_(std::move(models)), reference_(std::move(reference)), sigma_(sigma) {
  if (!reference_) throw PreconditionError("output similarity: null reference model");
  if (models_.empty()) throw PreconditionError("output similarity: no models");
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw PreconditionError("output similarity: sigma must be > 0");
  require_same_dim(models_, reference_, "output similarity");
  for (const auto& m : models_) {
    if (m->num_classes() != reference_->num_classes()) throw ArityError("output similarity: output arity mismatch");
  }
}

bool OutputSimilarityTerm::differentiable() const {
  return reference_->differentiable() && all_differentiable(models_);
}

double OutputSimilarityTerm::value(const Vector& x) const {
  const Vector yr = similarity_output(*reference_, x);
  const double s2 = sigma_ * sigma_;
  double total = 0.0;
  for (const auto& m : models_) total += std::exp(-(similarity_output(*m, x) - yr).squaredNorm() / s2);
  return total / static_cast<double>(models_.size());
}

Vector OutputSimilarityTerm::gradient(const Vector& x) const {
  if (!differentiable()) throw NotDifferentiableError("output similarity: a model is a tree");
  const Vector yr = similarity_output(*reference_, x);
  const Matrix jr = similarity_jacobian(*reference_, x);
  const double s2 = sigma_ * sigma_;
  Vector g = Vector::Zero(x.size());
  for (const auto& m : models_) {
    const Vector diff = similarity_output(*m, x) - yr;
    const double e = std::exp(-diff.squaredNorm() / s2);
    g += (-2.0 * e / s2) * ((similarity_jacobian(*m, x) - jr).transpose() * diff);
  }
  return g / static_cast<double>(models_.size());
}

// ---------------------------------------------------------------------------

RiskyNormTerm::RiskyNormTerm(PredictorPtr model, GradientTarget output, double alpha, double r)
    : model_(std::move(model)), output_(output), alpha_(alpha), r_(r) {
  if (!model_) throw PreconditionError("risky norm: null model");
  if (!(r_ >= 1.0)) throw PreconditionError("risky norm: order r must be >= 1");
  switch (output_.kind) {
    case GradientTarget::Kind::Decision:
      if (model_->is_classifier() && model_->num_classes() != 2) {
        throw ArityError("risky norm: decision output needs a binary classifier or regressor");
      }
      break;
    case GradientTarget::Kind::Probability:
    case GradientTarget::Kind::Logit:
      if (!model_->is_classifier()) throw ArityError("risky norm: class output on a regressor");
      if (output_.index < 0 || output_.index >= model_->num_classes()) throw ArityError("risky norm: class index");
      break;
  }
}

double RiskyNormTerm::output(const Vector& x) const {
  switch (output_.kind) {
    case GradientTarget::Kind::Decision: return model_->decision_value(x);
    case GradientTarget::Kind::Probability: return model_->predict_proba(x)[output_.index];
    case GradientTarget::Kind::Logit: return model_->raw_output(x)[output_.index];
  }
  return 0.0;
}

double RiskyNormTerm::value(const Vector& x) const { return std::pow(std::abs(output(x) - alpha_), r_); }

Vector RiskyNormTerm::gradient(const Vector& x) const {
  const double d = output(x) - alpha_;
  const double mag = r_ == 1.0 ? 1.0 : std::pow(std::abs(d), r_ - 1.0);
  const double sgn = (d > 0) - (d < 0);
  return (r_ * sgn * mag) * model_->input_gradient(x, output_);
}

// ---------------------------------------------------------------------------

NegativeEntropyTerm::NegativeEntropyTerm(PredictorPtr model) : model_(std::move(model)) {
  if (!model_) throw PreconditionError("risky entropy: null model");
  if (!model_->is_classifier()) throw ArityError("risky entropy: needs a classifier");
}

double NegativeEntropyTerm::value(const Vector& x) const {
  const Vector p = model_->predict_proba(x);
  double s = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (p[k] > 0.0) s += p[k] * std::log(p[k]);
  }
  return s;
}

Vector NegativeEntropyTerm::gradient(const Vector& x) const {
  const Vector p = model_->predict_proba(x);
  Vector w(p.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) w[k] = std::log(std::max(p[k], kProbFloor)) + 1.0;
  return model_->proba_jacobian(x).transpose() * w;
}

// ---------------------------------------------------------------------------

CertaintyPinTerm::CertaintyPinTerm(PredictorPtr model, int target_class) : model_(std::move(model)), target_(target_class) {
  if (!model_) throw PreconditionError("certainty pin: null model");
  if (!model_->is_classifier()) throw ArityError("certainty pin: needs a classifier");
  if (target_ < 0 || target_ >= model_->num_classes()) throw ArityError("certainty pin: class index out of range");
}

double CertaintyPinTerm::value(const Vector& x) const {
  Vector p = model_->predict_proba(x);
  p[target_] -= 1.0;
  return p.squaredNorm();
}

Vector CertaintyPinTerm::gradient(const Vector& x) const {
  Vector p = model_->predict_proba(x);
  p[target_] -= 1.0;
  return 2.0 * (model_->proba_jacobian(x).transpose() * p);
}

// ---------------------------------------------------------------------------

QuadraticTerm::QuadraticTerm(Matrix q, Vector linear, double constant, std::string name)
    : q_(std::move(q)), linear_(std::move(linear)), constant_(constant), name_(std::move(name)) {
  if (q_.rows() != q_.cols() || q_.rows() != linear_.size()) throw PreconditionError("quadratic: shape mismatch");
  q_ = 0.5 * (q_ + q_.transpose()).eval();
}

double QuadraticTerm::value(const Vector& x) const { return x.dot(q_ * x) + linear_.dot(x) + constant_; }

Vector QuadraticTerm::gradient(const Vector& x) const { return 2.0 * (q_ * x) + linear_; }

FunctionTerm::FunctionTerm(ValueFn value, GradientFn gradient, std::string name, int input_dim)
    : value_(std::move(value)), gradient_(std::move(gradient)), name_(std::move(name)), dim_(input_dim) {
  if (!value_) throw PreconditionError("function term: empty value callable");
}

Vector FunctionTerm::gradient(const Vector& x) const {
  if (!gradient_) return EnergyTerm::gradient(x);
  return gradient_(x);
}

// ---------------------------------------------------------------------------

ProbeFunction fixed_label_g(PredictorPtr model, double y_prime, std::optional<Regularizer> reg) {
  if (!model) throw PreconditionError("fixed_label_g: null model");
  ProbeFunction g({{1.0, std::make_shared<LabelLossTerm>(std::vector<PredictorPtr>{std::move(model)}, y_prime)}});
  return with_reg(std::move(g), std::move(reg));
}

ProbeFunction ensemble_fixed_label_g(const ParamEnsemble& ensemble, const Predictor& family, double y_prime,
                                     std::optional<Regularizer> reg) {
  if (ensemble.samples.empty()) throw PreconditionError("ensemble_fixed_label_g: empty ensemble");
  ProbeFunction g({{1.0, std::make_shared<LabelLossTerm>(ensemble.members(family), y_prime)}});
  return with_reg(std::move(g), std::move(reg));
}

ProbeFunction contrast_g(PredictorPtr p1, PredictorPtr p2, std::optional<Regularizer> reg, ContrastOptions options) {
  if (!p1 || !p2) throw PreconditionError("contrast_g: null model");
  if (p1->num_classes() != p2->num_classes()) {
    throw ArityError("contrast_g: models have different output arity (" + std::to_string(p1->num_classes()) +
                     " vs " + std::to_string(p2->num_classes()) + ")");
  }
  if (p1->num_classes() != 2) return regression_contrast_g(std::move(p1), std::move(p2), options.sigma, std::move(reg));
  const ContrastTarget target =
      options.target.value_or(p2->differentiable() ? ContrastTarget::Soft : ContrastTarget::Hard);
  ProbeFunction g(
      {{1.0, std::make_shared<ContrastTerm>(std::vector<PredictorPtr>{std::move(p1)}, std::move(p2), target)}});
  return with_reg(std::move(g), std::move(reg));
}

ProbeFunction regression_contrast_g(PredictorPtr p1, PredictorPtr p2, double sigma, std::optional<Regularizer> reg) {
  if (!p1 || !p2) throw PreconditionError("regression_contrast_g: null model");
  if (p1->num_classes() != p2->num_classes()) throw ArityError("regression_contrast_g: output arity mismatch");
  ProbeFunction g({{1.0, std::make_shared<OutputSimilarityTerm>(std::vector<PredictorPtr>{std::move(p1)},
                                                                std::move(p2), sigma)}});
  return with_reg(std::move(g), std::move(reg));
}

ProbeFunction risky_g(PredictorPtr model, const RiskyOptions& options, std::optional<Regularizer> reg) {
  if (!model) throw PreconditionError("risky_g: null model");
  TermPtr term;
  if (options.mode == RiskyMode::Entropy) {
    term = std::make_shared<NegativeEntropyTerm>(std::move(model));
  } else {
    term = std::make_shared<RiskyNormTerm>(std::move(model), options.output, options.alpha, options.r);
  }
  return with_reg(ProbeFunction({{1.0, term}}), std::move(reg));
}

ProbeFunction param_sensitive_g(const ParamEnsemble& ensemble, PredictorPtr p_star, std::optional<Regularizer> reg) {
  if (!p_star) throw PreconditionError("param_sensitive_g: null model");
  if (ensemble.samples.empty()) throw PreconditionError("param_sensitive_g: empty ensemble");
  ProbeFunction g({{1.0, std::make_shared<ContrastTerm>(ensemble.members(*p_star), p_star, ContrastTarget::Soft)}});
  return with_reg(std::move(g), std::move(reg));
}

ProbeFunction regression_sensitive_g(const ParamEnsemble& ensemble, PredictorPtr p_star, double sigma,
                                     std::optional<Regularizer> reg) {
  if (!p_star) throw PreconditionError("regression_sensitive_g: null model");
  if (ensemble.samples.empty()) throw PreconditionError("regression_sensitive_g: empty ensemble");
  ProbeFunction g({{1.0, std::make_shared<OutputSimilarityTerm>(ensemble.members(*p_star), p_star, sigma)}});
  return with_reg(std::move(g), std::move(reg));
}

WeightedTerm certainty_pin_g(PredictorPtr pin_model, int target_class, double weight) {
  if (!(weight >= 0.0)) throw PreconditionError("certainty_pin_g: weight must be >= 0");
  return {weight, std::make_shared<CertaintyPinTerm>(std::move(pin_model), target_class)};
}

}  // namespace probekit
