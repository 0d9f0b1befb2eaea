#include "probekit/mlp.hpp"

#include <cmath>
#include <random>

#include "probekit/errors.hpp"

namespace probekit {

double LearningRateSchedule::at(long step) const {
  return initial * std::pow(decay_rate, static_cast<double>(step) / static_cast<double>(decay_steps));
}

Mlp::Mlp(std::vector<Layer> layers, InputScaler scaler, bool classifier, double dropout_rate)
    : layers_(std::move(layers)), scaler_(std::move(scaler)), classifier_(classifier), dropout_rate_(dropout_rate) {
  if (layers_.size() < 2) throw SpecError("mlp: at least one hidden layer is required");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].weight.rows()) throw SpecError("mlp: bias/weight shape mismatch");
    if (l > 0 && layers_[l].weight.cols() != layers_[l - 1].weight.rows()) {
      throw SpecError("mlp: layer " + std::to_string(l) + " input width mismatch");
    }
  }
  if (scaler_.mean.size() != input_dim()) throw SpecError("mlp: scaler dimension");
  const auto out = layers_.back().weight.rows();
  if (classifier_ ? out < 2 : out != 1) throw SpecError("mlp: output width does not match output arity");
}

int Mlp::num_classes() const { return classifier_ ? static_cast<int>(layers_.back().weight.rows()) : 0; }

RawEvaluation Mlp::evaluate_raw(const Vector& x, bool with_jacobian) const {
  check_input(x);
  Vector h = scaler_.apply(x);
  Matrix jac;
  if (with_jacobian) jac = Matrix(scaler_.scale.cwiseInverse().asDiagonal());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Vector a = layer.weight * h + layer.bias;
    if (with_jacobian) jac = layer.weight * jac;
    if (l + 1 < layers_.size()) {
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a[i] <= 0) {
          a[i] = 0;
          if (with_jacobian) jac.row(i).setZero();
        }
      }
    }
    h = std::move(a);
  }
  return {std::move(h), std::move(jac)};
}

std::optional<ParamVector> Mlp::params() const {
  std::vector<ParamSegment> layout;
  int total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const int nw = static_cast<int>(layers_[l].weight.size());
    const int nb = static_cast<int>(layers_[l].bias.size());
    layout.push_back({"W" + std::to_string(l), total, nw});
    total += nw;
    layout.push_back({"b" + std::to_string(l), total, nb});
    total += nb;
  }
  Vector theta(total);
  int at = 0;
  for (const auto& layer : layers_) {
    theta.segment(at, layer.weight.size()) = Eigen::Map<const Vector>(layer.weight.data(), layer.weight.size());
    at += static_cast<int>(layer.weight.size());
    theta.segment(at, layer.bias.size()) = layer.bias;
    at += static_cast<int>(layer.bias.size());
  }
  return ParamVector(std::move(theta), std::move(layout));
}

std::shared_ptr<const Predictor> Mlp::with_params(const ParamVector& params) const {
  std::vector<Layer> layers = layers_;
  int at = 0;
  for (auto& layer : layers) {
    if (at + layer.weight.size() + layer.bias.size() > params.size()) throw PreconditionError("mlp: parameter length");
    layer.weight = Eigen::Map<const Matrix>(params.theta().data() + at, layer.weight.rows(), layer.weight.cols());
    at += static_cast<int>(layer.weight.size());
    layer.bias = params.theta().segment(at, layer.bias.size());
    at += static_cast<int>(layer.bias.size());
  }
  if (at != params.size()) throw PreconditionError("mlp: parameter length");
  return std::make_shared<Mlp>(std::move(layers), scaler_, classifier_, dropout_rate_);
}

namespace {
std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }
}  // namespace

nlohmann::json Mlp::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    layers.push_back({{"rows", layer.weight.rows()},
                      {"cols", layer.weight.cols()},
                      {"weight", std::vector<double>(layer.weight.data(), layer.weight.data() + layer.weight.size())},
                      {"bias", to_std(layer.bias)}});
  }
  return {{"kind", to_string(kind())},
          {"input_dim", input_dim()},
          {"classifier", classifier_},
          {"dropout_rate", dropout_rate_},
          {"layers", layers},
          {"scaler", {{"mean", to_std(scaler_.mean)}, {"scale", to_std(scaler_.scale)}}}};
}

std::shared_ptr<const Mlp> fit_mlp(const Dataset& data, const MlpSpec& spec, const MlpTrainOptions& options) {
  if (spec.layer_widths.size() < 2) throw SpecError("mlp: at least one hidden layer is required");
  for (int w : spec.layer_widths) {
    if (w < 1) throw SpecError("mlp: layer widths must be positive");
  }
  if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) throw SpecError("mlp: dropout rate must be in [0, 1)");
  if (options.batch < 1 || options.steps < 0) throw PreconditionError("mlp: batch >= 1 and steps >= 0 required");
  if (!data.has_labels()) throw PreconditionError("mlp: dataset needs labels");
  const bool classifier = data.num_classes() > 0;
  const int out_width = spec.layer_widths.back();
  const int arity = classifier ? data.num_classes() : 1;
  if (out_width != arity) {
    throw SpecError("mlp: final width " + std::to_string(out_width) + " does not match label arity " +
                    std::to_string(arity));
  }

  const int d = data.dimension();
  const InputScaler scaler = options.standardize ? InputScaler::fit(data) : InputScaler::identity(d);
  const Matrix raw = data.feature_matrix();
  const Matrix inputs =
      ((raw.rowwise() - scaler.mean.transpose()).array().rowwise() / scaler.scale.transpose().array())
          .matrix()
          .transpose();  // (d x N)
  const Vector labels = data.label_vector();
  const Eigen::Index n = inputs.cols();

  std::mt19937_64 rng(options.seed);
  std::vector<Mlp::Layer> layers;
  int fan_in = d;
  for (int width : spec.layer_widths) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / fan_in));
    Mlp::Layer layer{Matrix(width, fan_in), Vector::Zero(width)};
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = init(rng);
    layers.push_back(std::move(layer));
    fan_in = width;
  }
  const std::size_t L = layers.size();
  std::vector<Matrix> m_w(L), v_w(L);
  std::vector<Vector> m_b(L), v_b(L);
  for (std::size_t l = 0; l < L; ++l) {
    m_w[l] = v_w[l] = Matrix::Zero(layers[l].weight.rows(), layers[l].weight.cols());
    m_b[l] = v_b[l] = Vector::Zero(layers[l].bias.size());
  }

  const int batch = static_cast<int>(std::min<Eigen::Index>(options.batch, n));
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::bernoulli_distribution keep(1.0 - spec.dropout_rate);
  const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
  std::vector<double> trace;

  std::vector<Matrix> pre(L), act(L + 1), masks(L);
  for (long step = 0; step < options.steps; ++step) {
    Matrix x(d, batch);
    Matrix target = Matrix::Zero(arity, batch);
    for (int b = 0; b < batch; ++b) {
      const Eigen::Index i = pick(rng);
      x.col(b) = inputs.col(i);
      if (classifier) {
        target(static_cast<Eigen::Index>(labels[i]), b) = 1.0;
      } else {
        target(0, b) = labels[i];
      }
    }
    act[0] = std::move(x);
    for (std::size_t l = 0; l < L; ++l) {
      pre[l] = (layers[l].weight * act[l]).colwise() + layers[l].bias;
      if (l + 1 < L) {
        Matrix h = pre[l].cwiseMax(0.0);
        if (spec.dropout_rate > 0) {
          masks[l] = Matrix(h.rows(), h.cols());
          for (Eigen::Index k = 0; k < h.size(); ++k) masks[l].data()[k] = keep(rng) ? keep_scale : 0.0;
          h = h.cwiseProduct(masks[l]);
        }
        act[l + 1] = std::move(h);
      } else {
        act[l + 1] = pre[l];
      }
    }
    const Matrix& out = act[L];
    Matrix delta(out.rows(), out.cols());
    double loss = 0.0;
    if (classifier) {
      for (int b = 0; b < batch; ++b) {
        const Vector z = out.col(b);
        const double lse = log_sum_exp(z);
        Eigen::Index cls = 0;
        target.col(b).maxCoeff(&cls);
        loss += lse - z[cls];
        delta.col(b) = (z.array() - lse).exp().matrix() - target.col(b);
      }
    } else {
      delta = out - target;
      loss = 0.5 * delta.squaredNorm();
    }
    loss /= batch;
    delta /= batch;
    if (!std::isfinite(loss)) {
      throw TrainingDivergedError("mlp training diverged at step " + std::to_string(step) +
                                      " (non-finite loss); lower the learning rate",
                                  step);
    }
    if (step % 100 == 0) trace.push_back(loss);

    const double lr = options.schedule.at(step);
    const double bc1 = 1.0 - std::pow(options.beta1, static_cast<double>(step + 1));
    const double bc2 = 1.0 - std::pow(options.beta2, static_cast<double>(step + 1));
    for (std::size_t l = L; l-- > 0;) {
      const Matrix grad_w = delta * act[l].transpose();
      const Vector grad_b = delta.rowwise().sum();
      if (l > 0) {
        Matrix back = layers[l].weight.transpose() * delta;
        back = back.cwiseProduct((pre[l - 1].array() > 0).cast<double>().matrix());
        if (spec.dropout_rate > 0) back = back.cwiseProduct(masks[l - 1]);
        delta = std::move(back);
      }
      m_w[l] = options.beta1 * m_w[l] + (1 - options.beta1) * grad_w;
      v_w[l] = options.beta2 * v_w[l] + (1 - options.beta2) * grad_w.cwiseAbs2();
      m_b[l] = options.beta1 * m_b[l] + (1 - options.beta1) * grad_b;
      v_b[l] = options.beta2 * v_b[l] + (1 - options.beta2) * grad_b.cwiseAbs2();
      layers[l].weight.array() -=
          lr * (m_w[l].array() / bc1) / ((v_w[l].array() / bc2).sqrt() + options.adam_epsilon);
      layers[l].bias.array() -=
          lr * (m_b[l].array() / bc1) / ((v_b[l].array() / bc2).sqrt() + options.adam_epsilon);
    }
    if (!layers.front().weight.allFinite()) {
      throw TrainingDivergedError("mlp training diverged at step " + std::to_string(step) + " (non-finite weights)",
                                  step);
    }
  }

  auto model = std::make_shared<Mlp>(std::move(layers), scaler, classifier, spec.dropout_rate);
  model->loss_trace = std::move(trace);
  return model;
}

}  // namespace probekit
