#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "probekit/probing.hpp"
#include "probekit/types.hpp"

namespace probekit {

enum class PosteriorSpace { Parameter, Data };

std::string to_string(PosteriorSpace space);

/// Gaussian stored by mean and precision (inverse covariance).
struct GaussianPosterior {
  Vector mean;
  Matrix precision;
  PosteriorSpace space = PosteriorSpace::Data;

  Matrix covariance() const;
  nlohmann::json to_json() const;
  static GaussianPosterior from_json(const nlohmann::json& j);
};

/// Sample statistics of a least-squares fit y ~ xi'x + b.
struct LrSummary {
  Vector xbar;
  Matrix a;  // X'X/N - xbar xbar'
  Vector xi_hat;
  double b_hat = 0.0;
  Vector cov_xy;  // (1/N) sum (x_i - xbar)(yhat_i - mean_yhat)
  double var_yhat = 0.0;
  double mean_yhat = 0.0;
  long n = 0;
};

struct LrOptions {
  /// Add 1e-8 * I to a singular A instead of throwing.
  bool jitter = false;
};

inline constexpr double kLrJitter = 1e-8;

/// Throws SingularError when [X, 1] is rank deficient.
LrSummary lr_summary(const Dataset& data);

/// q*(theta) = N(theta_hat, (D'D / (N tau))^-1) over theta = (xi, b).
GaussianPosterior lr_parameter_posterior(const Dataset& data, double tau);

/// F(theta) = ||D theta - y||^2 / (2N), whose Gibbs density at tau is q*.
ProbeFunction lr_parameter_energy(const Dataset& data);

/// P = tau A^-1 + xi xi', the quadratic form of the data-space energy.
Matrix lr_data_quadratic_form(const Dataset& data, double tau, const LrOptions& options = {});

/// The Gaussian exp(-G_w / tau) for the data energy below: mean
/// f_hat = xbar + Cov(X, yhat) / (tau + Var(yhat)) (w - mean_yhat), precision 2P / tau.
/// The mean is cross-checked against the Sherman-Morrison route
/// P^-1 (tau A^-1 xbar + xi (w - b)).
GaussianPosterior lr_data_posterior(const Dataset& data, double w, double tau, const LrOptions& options = {});

/// G_w(f) = E_{theta ~ q*} |z'theta - w|^2 with z = (f, 1), expanded exactly as
/// z'(theta_hat theta_hat' + tau (D'D/N)^-1) z - 2 w z'theta_hat + w^2.
ProbeFunction lr_data_energy(const Dataset& data, double w, double tau);

}  // namespace probekit
