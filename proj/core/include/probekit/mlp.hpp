#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "probekit/linear_models.hpp"
#include "probekit/predictor.hpp"

namespace probekit {

/// Hidden widths followed by the output width; the input width comes from the
/// data. Hidden layers use ReLU; the final width is the output arity (number
/// of classes, or 1 for regression).
struct MlpSpec {
  std::vector<int> layer_widths;
  double dropout_rate = 0.0;  // training only
};

/// lr(step) = initial * decay_rate^(step / decay_steps)
struct LearningRateSchedule {
  double initial = 0.1;
  double decay_rate = 0.9;
  int decay_steps = 100;

  double at(long step) const;
};

struct MlpTrainOptions {
  long steps = 10000;
  int batch = 128;
  LearningRateSchedule schedule{};
  std::uint64_t seed = 0;
  bool standardize = true;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

class Mlp final : public Predictor {
 public:
  struct Layer {
    Matrix weight;  // (out x in)
    Vector bias;
  };

  Mlp(std::vector<Layer> layers, InputScaler scaler, bool classifier, double dropout_rate = 0.0);

  ModelKind kind() const override { return ModelKind::Mlp; }
  int input_dim() const override { return static_cast<int>(layers_.front().weight.cols()); }
  int num_classes() const override;
  bool differentiable() const override { return true; }

  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  std::optional<ParamVector> params() const override;
  std::shared_ptr<const Predictor> with_params(const ParamVector& params) const override;
  nlohmann::json to_json() const override;

  const std::vector<Layer>& layers() const { return layers_; }
  const InputScaler& scaler() const { return scaler_; }
  double dropout_rate() const { return dropout_rate_; }

  std::vector<double> loss_trace;

 private:
  std::vector<Layer> layers_;
  InputScaler scaler_;
  bool classifier_;
  double dropout_rate_;
};

/// Mini-batch Adam with inverted dropout after each hidden activation.
/// Throws SpecError for an invalid spec and TrainingDivergedError when the
/// loss becomes non-finite.
std::shared_ptr<const Mlp> fit_mlp(const Dataset& data, const MlpSpec& spec, const MlpTrainOptions& options = {});

}  // namespace probekit
