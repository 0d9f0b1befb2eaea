#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/types.hpp"

namespace probekit {

/// Two noisy rings labelled 0 (inner) and 1 (outer); radial noise with sd noise_sd.
Dataset concentric_circles(int n_per_class, double r_inner = 1.0, double r_outer = 2.0, double noise_sd = 0.1,
                           std::uint64_t seed = 7);

/// Isotropic Gaussian clusters, one per row of `centers`, labelled by row.
Dataset gaussian_blobs(int n_per_class, const Matrix& centers, double sd, std::uint64_t seed);

/// Uniform points on [-1, 1]^2 labelled by the sign pattern (x0 > 0) xor (x1 > 0).
Dataset xor_dataset(int n, std::uint64_t seed);

/// Eight standardized pseudo-financial features, binary "good credit" label
/// drawn from a monotone logistic model of those features.
Dataset synthetic_credit(int n, std::uint64_t seed);

/// Coefficients of the credit label logit in feature order, intercept last.
Vector synthetic_credit_coefficients();

/// Thirteen wine-chemistry features drawn from independent per-class normals
/// with published class means and deviations (59 / 71 / 48 samples by default).
Dataset synthetic_wine(std::uint64_t seed, double size_factor = 1.0);

/// Six features, smooth nonlinear regression target with Gaussian noise.
Dataset synthetic_housing(int n, std::uint64_t seed);

/// y = beta'x + 0.3 + noise * e with standard normal x, beta and e.
Dataset linear_gaussian(int n, int d, double noise, std::uint64_t seed);

/// Generator names accepted by make_dataset.
std::vector<std::string> dataset_generators();

/// Runs a generator by name. `params` holds its size and shape arguments
/// (n, n_per_class, d, noise, r_inner, r_outer, centers, sd, size_factor);
/// missing keys take the generator defaults. Throws SpecError for an unknown
/// generator or parameter.
Dataset make_dataset(const std::string& name, const nlohmann::json& params, std::uint64_t seed);

}  // namespace probekit
