#include "probekit/latent.hpp"

#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

class PushforwardTerm final : public EnergyTerm {
 public:
  PushforwardTerm(TermPtr inner, std::shared_ptr<const LatentMap> phi) : inner_(std::move(inner)), phi_(std::move(phi)) {}

  double value(const Vector& z) const override { return inner_->value(phi_->apply(z)); }
  bool differentiable() const override { return inner_->differentiable(); }
  Vector gradient(const Vector& z) const override {
    return phi_->jacobian(z).transpose() * inner_->gradient(phi_->apply(z));
  }
  std::string name() const override { return inner_->name(); }
  int input_dim() const override { return phi_->input_dim(); }

 private:
  TermPtr inner_;
  std::shared_ptr<const LatentMap> phi_;
};

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vector r = m.row(i).transpose();
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw IoError("latent map: empty weight matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw IoError("latent map: ragged weight matrix");
    for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c];
  }
  return m;
}

}  // namespace

LatentMap::LatentMap(std::vector<LatentLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw SpecError("latent map: needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0) throw SpecError("latent map: empty layer");
    if (l.bias.size() != l.weight.rows()) throw SpecError("latent map: bias size mismatch");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows()) throw SpecError("latent map: layer shapes do not chain");
    if (!l.weight.allFinite() || !l.bias.allFinite()) throw SpecError("latent map: non-finite parameters");
  }
}

LatentMap LatentMap::identity(int dim) {
  return LatentMap({{Matrix::Identity(dim, dim), Vector::Zero(dim), Activation::Identity}});
}

LatentMap LatentMap::affine(Matrix m, Vector c) { return LatentMap({{std::move(m), std::move(c), Activation::Identity}}); }

LatentMap LatentMap::standardizing(const Vector& center, const Vector& scale) {
  if (center.size() != scale.size()) throw PreconditionError("latent map: center and scale differ in size");
  if (!(scale.array() > 0.0).all()) throw PreconditionError("latent map: scales must be > 0");
  return affine(scale.asDiagonal(), center);
}

Vector LatentMap::apply(const Vector& z) const {
  if (z.size() != input_dim()) throw PreconditionError("latent map: input dimension mismatch");
  Vector h = z;
  for (const auto& l : layers_) {
    h = l.weight * h + l.bias;
    if (l.activation == Activation::Tanh) h = h.array().tanh();
  }
  return h;
}

Matrix LatentMap::jacobian(const Vector& z) const {
  if (z.size() != input_dim()) throw PreconditionError("latent map: input dimension mismatch");
  Vector h = z;
  Matrix j = Matrix::Identity(z.size(), z.size());
  for (const auto& l : layers_) {
    h = l.weight * h + l.bias;
    j = l.weight * j;
    if (l.activation == Activation::Tanh) {
      h = h.array().tanh();
      j = (1.0 - h.array().square()).matrix().asDiagonal() * j;
    }
  }
  return j;
}

nlohmann::json LatentMap::to_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) {
    layers.push_back({{"weight", matrix_json(l.weight)},
                      {"bias", std::vector<double>(l.bias.begin(), l.bias.end())},
                      {"activation", l.activation == Activation::Tanh ? "tanh" : "identity"}});
  }
  return {{"layers", layers}};
}

LatentMap LatentMap::from_json(const nlohmann::json& j) {
  std::vector<LatentLayer> layers;
  for (const auto& lj : j.at("layers")) {
    LatentLayer l;
    l.weight = matrix_from_json(lj.at("weight"));
    const auto b = lj.at("bias").get<std::vector<double>>();
    l.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
    const auto act = lj.value("activation", std::string("identity"));
    if (act == "tanh") {
      l.activation = Activation::Tanh;
    } else if (act != "identity") {
      throw IoError("latent map: unknown activation '" + act + "'");
    }
    layers.push_back(std::move(l));
  }
  return LatentMap(std::move(layers));
}

ProbeFunction pushforward_probe(const ProbeFunction& g, std::shared_ptr<const LatentMap> phi) {
  if (!phi) throw PreconditionError("pushforward: null map");
  if (g.input_dim() >= 0 && g.input_dim() != phi->output_dim()) {
    throw PreconditionError("pushforward: map output dimension " + std::to_string(phi->output_dim()) +
                            " does not match energy input dimension " + std::to_string(g.input_dim()));
  }
  std::vector<WeightedTerm> terms;
  for (const auto& t : g.terms()) terms.push_back({t.weight, std::make_shared<PushforwardTerm>(t.term, phi)});
  return ProbeFunction(std::move(terms));
}

ProbeReport push_samples(const ProbeReport& latent_report, const LatentMap& phi, std::vector<std::string> feature_names) {
  Matrix out(latent_report.samples.rows(), phi.output_dim());
  for (Eigen::Index i = 0; i < out.rows(); ++i) out.row(i) = phi.apply(latent_report.samples.row(i).transpose()).transpose();
  ProbeReport r = ProbeReport::from_samples(std::move(out), std::move(feature_names));
  r.accepted = latent_report.accepted;
  r.proposed = latent_report.proposed;
  r.acceptance_rate = latent_report.acceptance_rate;
  r.stats = latent_report.stats;
  return r;
}

Bounds standardize_bounds(const Bounds& bounds, const Vector& center, const Vector& scale) {
  if (bounds.dimension() != center.size() || center.size() != scale.size()) {
    throw PreconditionError("standardize_bounds: dimension mismatch");
  }
  const Vector lo = (bounds.lo - center).cwiseQuotient(scale);
  const Vector hi = (bounds.hi - center).cwiseQuotient(scale);
  return Bounds(lo, hi);
}

}  // namespace probekit
