#pragma once

#include <memory>

#include "probekit/predictor.hpp"

namespace probekit {

struct Kernel {
  enum class Type { Rbf, Polynomial };
  Type type = Type::Rbf;
  double gamma = 1.0;   // rbf: exp(-gamma ||u - v||^2)
  int degree = 3;       // poly: (u'v + coef)^degree
  double coef = 1.0;

  static Kernel rbf(double gamma) { return {Type::Rbf, gamma, 3, 1.0}; }
  static Kernel polynomial(int degree, double coef = 1.0) { return {Type::Polynomial, 1.0, degree, coef}; }

  double operator()(const Vector& u, const Vector& v) const;
  /// d k(sv, x) / dx
  Vector gradient(const Vector& sv, const Vector& x) const;
};

struct SvmOptions {
  Kernel kernel{};
  double C = 1.0;
  double tolerance = 1e-3;   // stop when the maximal KKT violation falls below
  long max_iterations = 1000000;
  bool regression = false;   // epsilon-SVR when true
  double epsilon = 0.1;      // SVR tube half-width
};

/// f(x) = sum_i coef_i k(sv_i, x) + b. Classification uses labels mapped
/// to +-1 (class 1 -> +1); probabilities are (1 - s(f), s(f)) with the
/// logistic sigmoid s.
class KernelSvm final : public Predictor {
 public:
  KernelSvm(Kernel kernel, Matrix support_vectors, Vector coef, double bias, bool regression);

  ModelKind kind() const override { return ModelKind::KernelSvm; }
  int input_dim() const override { return static_cast<int>(support_vectors_.cols()); }
  int num_classes() const override { return regression_ ? 0 : 2; }
  bool differentiable() const override { return true; }

  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  std::optional<ParamVector> params() const override;
  std::shared_ptr<const Predictor> with_params(const ParamVector& params) const override;
  nlohmann::json to_json() const override;

  /// f(x) without the classifier's (0, f) packing.
  double decision_function(const Vector& x) const;

  const Kernel& kernel() const { return kernel_; }
  const Matrix& support_vectors() const { return support_vectors_; }
  const Vector& coef() const { return coef_; }
  double bias() const { return bias_; }

  /// Maximal KKT violation at termination and iterations used.
  double max_kkt_violation = 0.0;
  long iterations = 0;

 private:
  Kernel kernel_;
  Matrix support_vectors_;  // rows
  Vector coef_;
  double bias_;
  bool regression_;
};

/// SMO with second-order working-set selection. Throws PreconditionError for
/// C <= 0, ArityError for non-binary labels, ConvergenceError at the cap.
std::shared_ptr<const KernelSvm> fit_kernel_svm(const Dataset& data, const SvmOptions& options);

}  // namespace probekit
