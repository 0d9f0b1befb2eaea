#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "probekit/predictor.hpp"
#include "probekit/types.hpp"

namespace probekit {

/// How a chain obtains the drift of its Langevin proposals.
enum class GradientMode { Exact, Smoothed, None };

std::string to_string(GradientMode mode);
GradientMode gradient_mode_from_string(const std::string& s);

/// One additive piece of a probing energy.
class EnergyTerm {
 public:
  virtual ~EnergyTerm() = default;
  virtual double value(const Vector& x) const = 0;
  /// True when gradient() returns the exact gradient wherever the term is
  /// differentiable. Terms built on tree models return false.
  virtual bool differentiable() const = 0;
  virtual Vector gradient(const Vector& x) const;
  virtual std::string name() const = 0;
  /// Expected input dimension, or -1 when any dimension is accepted.
  virtual int input_dim() const { return -1; }
};

using TermPtr = std::shared_ptr<const EnergyTerm>;

struct WeightedTerm {
  double weight = 1.0;
  TermPtr term;
};

/// G(x) = sum_i weight_i * term_i(x). Immutable once built.
class ProbeFunction {
 public:
  ProbeFunction() = default;
  explicit ProbeFunction(std::vector<WeightedTerm> terms);

  ProbeFunction with_term(TermPtr term, double weight = 1.0) const;
  ProbeFunction with_term(WeightedTerm term) const { return with_term(std::move(term.term), term.weight); }

  double evaluate(const Vector& x) const;
  double operator()(const Vector& x) const { return evaluate(x); }
  /// Throws NotDifferentiableError unless every term is differentiable.
  Vector gradient(const Vector& x) const;
  std::vector<double> term_values(const Vector& x) const;

  bool differentiable() const;
  GradientMode natural_mode() const { return differentiable() ? GradientMode::Exact : GradientMode::Smoothed; }
  int input_dim() const;
  const std::vector<WeightedTerm>& terms() const { return terms_; }

 private:
  std::vector<WeightedTerm> terms_;
};

/// R(x) = lambda * sum_i w_i |x_i - anchor_i|^r, r >= 1.
class Regularizer final : public EnergyTerm {
 public:
  Regularizer(Vector anchor, double lambda, double r = 2.0, std::optional<Vector> weights = std::nullopt);

  double value(const Vector& x) const override;
  bool differentiable() const override { return true; }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "regularizer"; }
  int input_dim() const override { return static_cast<int>(anchor_.size()); }

  const Vector& anchor() const { return anchor_; }
  double lambda() const { return lambda_; }
  double order() const { return r_; }
  const Vector& weights() const { return weights_; }

 private:
  Vector anchor_;
  double lambda_;
  double r_;
  Vector weights_;
};

/// Gaussian perturbations theta_m = center + sigma_theta * zeta_m around a
/// trained parameter vector, reproducible from (center, sigma_theta, seed).
struct ParamEnsemble {
  ParamVector center;
  double sigma_theta = 0.0;
  std::uint64_t seed = 0;
  std::vector<ParamVector> samples;

  std::size_t size() const { return samples.size(); }
  /// Predictors sharing `family`'s architecture, one per sample.
  std::vector<PredictorPtr> members(const Predictor& family) const;
};

/// Mean over `models` of the label loss against a fixed target: cross-entropy
/// -log p_target for classifiers, (f(x) - target)^2 for regressors.
class LabelLossTerm final : public EnergyTerm {
 public:
  LabelLossTerm(std::vector<PredictorPtr> models, double target);

  double value(const Vector& x) const override;
  bool differentiable() const override;
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "label-loss"; }
  int input_dim() const override { return models_.front()->input_dim(); }

 private:
  std::vector<PredictorPtr> models_;
  double target_;
};

enum class ContrastTarget { Soft, Hard };

/// Mean over `models` of the binary cross-entropy between each model's class-1
/// probability q and the flipped reference t = 1 - y_ref(x), where y_ref is the
/// reference model's class-1 probability (soft) or predicted label (hard).
/// With hard targets or a tree reference, t is locally constant.
class ContrastTerm final : public EnergyTerm {
 public:
  ContrastTerm(std::vector<PredictorPtr> models, PredictorPtr reference, ContrastTarget target);

  double value(const Vector& x) const override;
  bool differentiable() const override;
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "contrast"; }
  int input_dim() const override { return reference_->input_dim(); }

  ContrastTarget target() const { return target_; }

 private:
  double flipped_target(const Vector& x) const;

  std::vector<PredictorPtr> models_;
  PredictorPtr reference_;
  ContrastTarget target_;
};

/// Mean over `models` of exp(-||y_m(x) - y_ref(x)||^2 / sigma^2), where y is the
/// prediction for regressors and the probability vector for classifiers.
class OutputSimilarityTerm final : public EnergyTerm {
 public:
  OutputSimilarityTerm(std::vector<PredictorPtr> models, PredictorPtr reference, double sigma);

  double value(const Vector& x) const override;
  bool differentiable() const override;
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "output-similarity"; }
  int input_dim() const override { return reference_->input_dim(); }

 private:
  std::vector<PredictorPtr> models_;
  PredictorPtr reference_;
  double sigma_;
};

/// |f(x) - alpha|^r for a chosen scalar output f (decision value or a class probability).
class RiskyNormTerm final : public EnergyTerm {
 public:
  RiskyNormTerm(PredictorPtr model, GradientTarget output, double alpha, double r);

  double value(const Vector& x) const override;
  bool differentiable() const override { return model_->differentiable(); }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "risky-norm"; }
  int input_dim() const override { return model_->input_dim(); }

  double output(const Vector& x) const;

 private:
  PredictorPtr model_;
  GradientTarget output_;
  double alpha_;
  double r_;
};

/// sum_k q_k log q_k of the class probabilities (negative Shannon entropy, nats).
class NegativeEntropyTerm final : public EnergyTerm {
 public:
  explicit NegativeEntropyTerm(PredictorPtr model);

  double value(const Vector& x) const override;
  bool differentiable() const override { return model_->differentiable(); }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "risky-entropy"; }
  int input_dim() const override { return model_->input_dim(); }

 private:
  PredictorPtr model_;
};

/// ||proba(x) - onehot(target)||_2^2
class CertaintyPinTerm final : public EnergyTerm {
 public:
  CertaintyPinTerm(PredictorPtr model, int target_class);

  double value(const Vector& x) const override;
  bool differentiable() const override { return model_->differentiable(); }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return "certainty-pin"; }
  int input_dim() const override { return model_->input_dim(); }

 private:
  PredictorPtr model_;
  int target_;
};

/// x'Qx + l'x + c with symmetric Q.
class QuadraticTerm final : public EnergyTerm {
 public:
  QuadraticTerm(Matrix q, Vector linear, double constant = 0.0, std::string name = "quadratic");

  double value(const Vector& x) const override;
  bool differentiable() const override { return true; }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return name_; }
  int input_dim() const override { return static_cast<int>(linear_.size()); }

  const Matrix& q() const { return q_; }
  const Vector& linear() const { return linear_; }

 private:
  Matrix q_;
  Vector linear_;
  double constant_;
  std::string name_;
};

/// Energy from plain callables; the gradient callable may be empty.
class FunctionTerm final : public EnergyTerm {
 public:
  using ValueFn = std::function<double(const Vector&)>;
  using GradientFn = std::function<Vector(const Vector&)>;

  FunctionTerm(ValueFn value, GradientFn gradient = {}, std::string name = "function", int input_dim = -1);

  double value(const Vector& x) const override { return value_(x); }
  bool differentiable() const override { return static_cast<bool>(gradient_); }
  Vector gradient(const Vector& x) const override;
  std::string name() const override { return name_; }
  int input_dim() const override { return dim_; }

 private:
  ValueFn value_;
  GradientFn gradient_;
  std::string name_;
  int dim_;
};

// ---------------------------------------------------------------------------
// Scenario builders. Each returns the probing energy plus the optional
// anchor regularizer.

/// Samples the model believes fit label (or value) y_prime.
ProbeFunction fixed_label_g(PredictorPtr model, double y_prime, std::optional<Regularizer> reg = std::nullopt);

/// Ensemble-averaged fixed-label energy; throws PreconditionError for an empty ensemble.
ProbeFunction ensemble_fixed_label_g(const ParamEnsemble& ensemble, const Predictor& family, double y_prime,
                                     std::optional<Regularizer> reg = std::nullopt);

struct ContrastOptions {
  /// Hard targets default on when the reference is not differentiable.
  std::optional<ContrastTarget> target;
  /// Yardstick for the exp-form used by regressor and multi-class pairs.
  double sigma = 1.0;
};

/// Samples where p1 and p2 disagree. Binary classifier pairs use the
/// cross-entropy form; regressor or multi-class pairs use the exp-form.
ProbeFunction contrast_g(PredictorPtr p1, PredictorPtr p2, std::optional<Regularizer> reg = std::nullopt,
                         ContrastOptions options = {});

/// exp(-(y1 - y2)^2 / sigma^2) + R(x). Throws PreconditionError for sigma <= 0.
ProbeFunction regression_contrast_g(PredictorPtr p1, PredictorPtr p2, double sigma,
                                    std::optional<Regularizer> reg = std::nullopt);

enum class RiskyMode { Norm, Entropy };

struct RiskyOptions {
  RiskyMode mode = RiskyMode::Norm;
  double alpha = 0.5;
  double r = 2.0;
  /// Norm mode output; decision value or a class probability.
  GradientTarget output = GradientTarget::probability(1);
};

ProbeFunction risky_g(PredictorPtr model, const RiskyOptions& options,
                      std::optional<Regularizer> reg = std::nullopt);

/// Samples whose classification flips under parameter perturbation.
ProbeFunction param_sensitive_g(const ParamEnsemble& ensemble, PredictorPtr p_star,
                                std::optional<Regularizer> reg = std::nullopt);

/// Regression counterpart with the exp-form yardstick sigma.
ProbeFunction regression_sensitive_g(const ParamEnsemble& ensemble, PredictorPtr p_star, double sigma,
                                     std::optional<Regularizer> reg = std::nullopt);

/// weight * ||proba(x) - onehot(target_class)||^2, to be added to another energy.
WeightedTerm certainty_pin_g(PredictorPtr pin_model, int target_class, double weight);

/// Default ensemble size used by the CLI.
inline constexpr int kDefaultEnsembleSize = 32;

}  // namespace probekit
