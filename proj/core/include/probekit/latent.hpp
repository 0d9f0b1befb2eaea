#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "probekit/probing.hpp"
#include "probekit/sampler.hpp"
#include "probekit/types.hpp"

namespace probekit {

enum class Activation { Identity, Tanh };

struct LatentLayer {
  Matrix weight;  // out x in
  Vector bias;
  Activation activation = Activation::Identity;
};

/// Smooth decoder phi: Z -> X built from affine layers with optional tanh.
class LatentMap {
 public:
  explicit LatentMap(std::vector<LatentLayer> layers);

  static LatentMap identity(int dim);
  static LatentMap affine(Matrix m, Vector c);
  /// x = scale .* z + center; maps standardized coordinates back to data units.
  static LatentMap standardizing(const Vector& center, const Vector& scale);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  const std::vector<LatentLayer>& layers() const { return layers_; }

  Vector apply(const Vector& z) const;
  /// d phi / d z, (output_dim x input_dim).
  Matrix jacobian(const Vector& z) const;

  nlohmann::json to_json() const;
  static LatentMap from_json(const nlohmann::json& j);

 private:
  std::vector<LatentLayer> layers_;
};

/// H = G o phi, term by term; gradients follow the chain rule J' grad G.
ProbeFunction pushforward_probe(const ProbeFunction& g, std::shared_ptr<const LatentMap> phi);

/// Maps every sample through phi and recomputes the summary statistics.
ProbeReport push_samples(const ProbeReport& latent_report, const LatentMap& phi,
                         std::vector<std::string> feature_names = {});

/// Bounds in standardized coordinates: (lo - center) / scale.
Bounds standardize_bounds(const Bounds& bounds, const Vector& center, const Vector& scale);

}  // namespace probekit
