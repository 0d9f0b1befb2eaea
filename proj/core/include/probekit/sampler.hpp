#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/probing.hpp"
#include "probekit/rng.hpp"
#include "probekit/types.hpp"

namespace probekit {

struct SmoothingOptions {
  double sigma = 0.1;
  int samples = 16;
  /// Divide the estimator by sigma (the usual Gaussian-smoothing identity).
  /// Off by default: the plain form is sigma times the smoothed gradient.
  bool inverse_sigma_scaling = false;
  /// Reuse the forward drift in the reverse transition density instead of
  /// re-estimating it at the proposal.
  bool reuse_drift_in_reverse = true;
};

struct ChainConfig {
  Temperature tau{1.0};
  double step_size = 0.01;
  long n_steps = 1000;
  /// Defaults to 20% of n_steps.
  std::optional<long> burn_in;
  long thinning = 1;
  std::uint64_t seed = 0;
  std::optional<Bounds> bounds;
  GradientMode gradient_mode = GradientMode::Exact;
  SmoothingOptions smoothing;

  long effective_burn_in() const { return burn_in.value_or(n_steps / 5); }
  long expected_samples() const { return (n_steps - effective_burn_in()) / thinning; }
  /// Throws PreconditionError on invalid values.
  void validate() const;

  nlohmann::json to_json() const;
  static ChainConfig from_json(const nlohmann::json& j);
};

struct ChainState {
  Vector x;
  double g_value = 0.0;
  /// Drift used for the last proposal (exact or smoothed gradient, zero in random-walk mode).
  Vector grad;
  long accepted = 0;
  long proposed = 0;
  long rejected_nonfinite = 0;
};

struct ProbeReport {
  Matrix samples;  // one row per retained sample
  std::vector<std::string> feature_names;
  double acceptance_rate = 0.0;
  long accepted = 0;
  long proposed = 0;
  Vector mean;
  Vector std;
  std::map<std::string, double> stats;

  std::size_t size() const { return static_cast<std::size_t>(samples.rows()); }

  /// Builds a report with mean/std filled from the samples.
  static ProbeReport from_samples(Matrix samples, std::vector<std::string> feature_names);

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

/// Log density of the Langevin proposal to <- from, up to a constant:
/// -||to - from + eta * drift_from||^2 / (4 eta tau).
double log_transition_density(const Vector& to, const Vector& from, const Vector& drift_from, double eta, double tau);

/// log of the Metropolis-Hastings ratio for the move x -> y (not capped at 0).
double log_acceptance_ratio(const Vector& x, double g_x, const Vector& drift_x, const Vector& y, double g_y,
                            const Vector& drift_y, double eta, double tau);

/// Monte-Carlo estimate (1/J) sum_j G(x + sigma e_j) e_j using antithetic pairs.
/// With inverse_sigma_scaling the result is additionally divided by sigma.
Vector smoothed_gradient(const ProbeFunction& g, const Vector& x, double sigma, int samples, Rng& rng,
                         bool inverse_sigma_scaling = false);

/// Initial state at x0; throws PreconditionError when G(x0) is not finite or x0 is out of bounds.
ChainState init_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg, Rng& rng);

/// One proposal plus accept/reject.
ChainState mala_step(ChainState state, const ProbeFunction& g, const ChainConfig& cfg, Rng& rng);

ProbeReport run_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg);

/// run_chain for energies built on tree models; requires smoothed gradients.
ProbeReport run_tree_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg);

/// Independent chains, chain i seeded with derive_seed(cfg.seed, i); samples
/// are merged in chain order regardless of thread count.
ProbeReport run_chains(const std::vector<Vector>& starts, const ProbeFunction& g, const ChainConfig& cfg,
                       int threads = 1);

/// theta_m = theta* + sigma_theta * zeta_m with zeta_m standard normal.
ParamEnsemble draw_param_ensemble(const Predictor& p_star, double sigma_theta, int m, std::uint64_t seed);

}  // namespace probekit
