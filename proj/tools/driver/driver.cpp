#include "driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <probekit/analytic_lr.hpp>
#include <probekit/datasets.hpp>
#include <probekit/io.hpp>
#include <probekit/latent.hpp>
#include <probekit/linear_models.hpp>
#include <probekit/log.hpp>
#include <probekit/metrics.hpp>
#include <probekit/mlp.hpp>
#include <probekit/probing.hpp>
#include <probekit/rng.hpp>
#include <probekit/serialize.hpp>
#include <probekit/svm.hpp>
#include <probekit/tree.hpp>

#ifndef PROBEKIT_VERSION
#define PROBEKIT_VERSION "0.0.0"
#endif

namespace probekit::driver {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Seed streams derived from the master seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kEnsembleStream = 2;
constexpr std::uint64_t kChainStream = 3;
constexpr std::uint64_t kModelStream = 100;

StageError config_error(const std::string& cause) { return StageError("config", cause, kExitConfig); }

template <class F>
auto in_stage(const char* name, int code, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), code);
  }
}

struct Param {
  const char* key;
  json fallback;  // null: optional, no default
  bool required = false;
};

json resolve(const std::string& what, const json& given, const std::vector<Param>& table) {
  if (!given.is_null() && !given.is_object()) throw config_error(what + " must be an object");
  json out = json::object();
  for (const auto& p : table) {
    if (given.contains(p.key) && !given.at(p.key).is_null()) {
      out[p.key] = given.at(p.key);
    } else if (p.required) {
      throw config_error(what + ": missing required parameter '" + p.key + "'");
    } else {
      out[p.key] = p.fallback;
    }
  }
  if (given.is_object()) {
    for (const auto& [key, value] : given.items()) {
      if (!out.contains(key)) throw config_error(what + ": unknown parameter '" + key + "'");
    }
  }
  return out;
}

fs::path resolve_path(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal();
}

// ---------------------------------------------------------------------------
// Models

json resolve_model_params(const std::string& kind, const json& given, std::uint64_t seed) {
  const std::string what = "model '" + kind + "'";
  switch (model_kind_from_string(kind)) {
    case ModelKind::LinearRegression:
      return resolve(what, given, {});
    case ModelKind::LogisticRegression:
      return resolve(what, given, {{"l2", 0.0}, {"steps", 2000}, {"learning_rate", 0.5}, {"standardize", true}});
    case ModelKind::Mlp:
      return resolve(what, given,
                     {{"hidden", json::array({32, 32})},
                      {"dropout", 0.0},
                      {"steps", 3000},
                      {"batch", 128},
                      {"learning_rate", 0.1},
                      {"decay_rate", 0.9},
                      {"decay_steps", 100},
                      {"standardize", true},
                      {"seed", seed}});
    case ModelKind::KernelSvm:
      return resolve(what, given,
                     {{"kernel", "rbf"},
                      {"gamma", 1.0},
                      {"degree", 3},
                      {"coef", 1.0},
                      {"C", 1.0},
                      {"tolerance", 1e-3},
                      {"max_iterations", 1000000},
                      {"regression", false},
                      {"epsilon", 0.1}});
    case ModelKind::DecisionTree:
      return resolve(what, given,
                     {{"max_depth", 32}, {"min_samples_split", 2}, {"max_features", 0}, {"seed", seed}});
    case ModelKind::RandomForest:
      return resolve(what, given,
                     {{"n_trees", 100},
                      {"max_depth", 32},
                      {"min_samples_split", 2},
                      {"max_features", 0},
                      {"seed", seed},
                      {"threads", 1}});
  }
  throw config_error("unknown model kind '" + kind + "'");
}

SvmOptions svm_options(const json& p) {
  SvmOptions o;
  const auto kernel = p.at("kernel").get<std::string>();
  if (kernel == "rbf") {
    o.kernel = Kernel::rbf(p.at("gamma").get<double>());
  } else if (kernel == "poly") {
    o.kernel = Kernel::polynomial(p.at("degree").get<int>(), p.at("coef").get<double>());
  } else {
    throw SpecError("kernel must be rbf or poly, got '" + kernel + "'");
  }
  o.C = p.at("C").get<double>();
  o.tolerance = p.at("tolerance").get<double>();
  o.max_iterations = p.at("max_iterations").get<long>();
  o.regression = p.at("regression").get<bool>();
  o.epsilon = p.at("epsilon").get<double>();
  return o;
}

PredictorPtr train_model(const ModelSection& m, const Dataset& data) {
  if (!m.path.empty()) return load_predictor(m.path);
  const json& p = m.params;
  switch (model_kind_from_string(m.kind)) {
    case ModelKind::LinearRegression:
      return fit_linear_regression(data);
    case ModelKind::LogisticRegression: {
      LogisticOptions o;
      o.l2 = p.at("l2").get<double>();
      o.steps = p.at("steps").get<int>();
      o.learning_rate = p.at("learning_rate").get<double>();
      o.standardize = p.at("standardize").get<bool>();
      return fit_logistic_regression(data, o);
    }
    case ModelKind::Mlp: {
      MlpSpec spec;
      for (int w : p.at("hidden").get<std::vector<int>>()) spec.layer_widths.push_back(w);
      spec.layer_widths.push_back(data.num_classes() > 0 ? data.num_classes() : 1);
      spec.dropout_rate = p.at("dropout").get<double>();
      MlpTrainOptions o;
      o.steps = p.at("steps").get<long>();
      o.batch = p.at("batch").get<int>();
      o.schedule.initial = p.at("learning_rate").get<double>();
      o.schedule.decay_rate = p.at("decay_rate").get<double>();
      o.schedule.decay_steps = p.at("decay_steps").get<int>();
      o.standardize = p.at("standardize").get<bool>();
      o.seed = p.at("seed").get<std::uint64_t>();
      return fit_mlp(data, spec, o);
    }
    case ModelKind::KernelSvm:
      return fit_kernel_svm(data, svm_options(p));
    case ModelKind::DecisionTree:
      return fit_tree(data, TreeOptions{p.at("max_depth").get<int>(), p.at("min_samples_split").get<int>(),
                                        p.at("max_features").get<int>(), p.at("seed").get<std::uint64_t>()});
    case ModelKind::RandomForest: {
      ForestOptions o;
      o.n_trees = p.at("n_trees").get<int>();
      o.max_depth = p.at("max_depth").get<int>();
      o.min_samples_split = p.at("min_samples_split").get<int>();
      o.max_features = p.at("max_features").get<int>();
      o.seed = p.at("seed").get<std::uint64_t>();
      o.threads = p.at("threads").get<int>();
      return fit_forest(data, o);
    }
  }
  throw SpecError("unknown model kind '" + m.kind + "'");
}

// ---------------------------------------------------------------------------
// Scenarios

std::vector<Param> with_regularizer(std::vector<Param> table) {
  table.push_back({"anchor", nullptr});
  table.push_back({"lambda", 0.0});
  table.push_back({"r", 2.0});
  return table;
}

json resolve_scenario(Scenario s, const json& given);

void check_choice(const std::string& what, const std::string& value, std::initializer_list<const char*> choices) {
  for (const char* c : choices) {
    if (value == c) return;
  }
  throw config_error(what + ": unexpected value '" + value + "'");
}

void check_regularizer(const std::string& what, const json& p) {
  const json& anchor = p.at("anchor");
  if (!anchor.is_null() && !anchor.is_number_unsigned() && !anchor.is_number_integer() && !anchor.is_array()) {
    throw config_error(what + ": anchor must be a row index or a vector");
  }
  if (anchor.is_number_integer() && anchor.get<long>() < 0) throw config_error(what + ": anchor index is negative");
  if (anchor.is_array()) (void)anchor.get<std::vector<double>>();
  const double lambda = p.at("lambda").get<double>();
  if (!(lambda >= 0.0)) throw config_error(what + ": lambda must be >= 0");
  if (lambda > 0.0 && anchor.is_null()) throw config_error(what + ": lambda > 0 needs an anchor");
  if (!(p.at("r").get<double>() >= 1.0)) throw config_error(what + ": r must be >= 1");
}

json resolve_scenario(Scenario s, const json& given) {
  const std::string what = "scenario '" + to_string(s) + "'";
  json p;
  switch (s) {
    case Scenario::FixedLabel:
      p = resolve(what, given, with_regularizer({{"y_prime", nullptr, true}}));
      (void)p.at("y_prime").get<double>();
      check_regularizer(what, p);
      break;
    case Scenario::Contrast:
      p = resolve(what, given, with_regularizer({{"target", nullptr}, {"sigma", 1.0}}));
      if (!p.at("target").is_null()) check_choice(what + " target", p.at("target").get<std::string>(), {"soft", "hard"});
      if (!(p.at("sigma").get<double>() > 0.0)) throw config_error(what + ": sigma must be > 0");
      check_regularizer(what, p);
      break;
    case Scenario::Risky:
      p = resolve(what, given,
                  with_regularizer({{"mode", "norm"},
                                    {"alpha", 0.5},
                                    {"power", 2.0},
                                    {"output", "probability"},
                                    {"class", 1}}));
      check_choice(what + " mode", p.at("mode").get<std::string>(), {"norm", "entropy"});
      check_choice(what + " output", p.at("output").get<std::string>(), {"probability", "decision", "logit"});
      (void)p.at("alpha").get<double>();
      (void)p.at("power").get<double>();
      (void)p.at("class").get<int>();
      check_regularizer(what, p);
      break;
    case Scenario::ParamSensitive:
      p = resolve(what, given,
                  with_regularizer({{"sigma_theta", nullptr, true}, {"ensemble_size", kDefaultEnsembleSize}, {"sigma", 1.0}}));
      if (!(p.at("sigma_theta").get<double>() > 0.0)) throw config_error(what + ": sigma_theta must be > 0");
      if (p.at("ensemble_size").get<int>() < 1) throw config_error(what + ": ensemble_size must be >= 1");
      if (!(p.at("sigma").get<double>() > 0.0)) throw config_error(what + ": sigma must be > 0");
      check_regularizer(what, p);
      break;
    case Scenario::WinePin:
      p = resolve(what, given, {{"pin_class", nullptr, true}, {"pin_weight", 5.0}});
      if (p.at("pin_class").get<int>() < 0) throw config_error(what + ": pin_class must be >= 0");
      if (!(p.at("pin_weight").get<double>() > 0.0)) throw config_error(what + ": pin_weight must be > 0");
      break;
    case Scenario::Latent: {
      p = resolve(what, given, {{"map", "standardizing"}, {"inner", nullptr, true}});
      const json& map = p.at("map");
      if (map.is_string()) {
        check_choice(what + " map", map.get<std::string>(), {"standardizing"});
      } else {
        (void)LatentMap::from_json(map);
      }
      const json& inner = p.at("inner");
      if (!inner.is_object() || !inner.contains("kind")) throw config_error(what + ": inner needs a kind");
      const Scenario k = scenario_from_string(inner.at("kind").get<std::string>());
      if (k == Scenario::Latent || k == Scenario::WinePin) {
        throw config_error(what + ": inner scenario must be fixed-label, contrast, risky or param-sensitive");
      }
      json rest = inner;
      rest.erase("kind");
      json resolved = resolve_scenario(k, rest);
      resolved["kind"] = to_string(k);
      p["inner"] = resolved;
      break;
    }
  }
  return p;
}

int models_needed(Scenario s, const json& p) {
  switch (s) {
    case Scenario::Contrast:
    case Scenario::WinePin:
      return 2;
    case Scenario::Latent:
      return models_needed(scenario_from_string(p.at("inner").at("kind").get<std::string>()), p.at("inner"));
    default:
      return 1;
  }
}

bool general_latent_map(Scenario s, const json& p) { return s == Scenario::Latent && p.at("map").is_object(); }

Vector anchor_vector(const json& anchor, const Dataset& data) {
  if (anchor.is_array()) {
    const auto v = anchor.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != data.dimension()) {
      throw PreconditionError("anchor has " + std::to_string(v.size()) + " entries, data has dimension " +
                              std::to_string(data.dimension()));
    }
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  const auto index = anchor.get<std::size_t>();
  if (index >= data.size()) throw PreconditionError("anchor row " + std::to_string(index) + " is out of range");
  return data[index].features;
}

std::optional<Regularizer> regularizer(const json& p, const Dataset& data) {
  const double lambda = p.at("lambda").get<double>();
  if (lambda == 0.0) return std::nullopt;
  return Regularizer(anchor_vector(p.at("anchor"), data), lambda, p.at("r").get<double>());
}

GradientTarget output_target(const json& p) {
  const auto output = p.at("output").get<std::string>();
  const int k = p.at("class").get<int>();
  if (output == "decision") return GradientTarget::decision();
  if (output == "logit") return GradientTarget::logit(k);
  return GradientTarget::probability(k);
}

ProbeFunction build_energy(Scenario s, const json& p, const std::vector<PredictorPtr>& models, const Dataset& data,
                           std::uint64_t ensemble_seed) {
  switch (s) {
    case Scenario::FixedLabel:
      return fixed_label_g(models[0], p.at("y_prime").get<double>(), regularizer(p, data));
    case Scenario::Contrast: {
      ContrastOptions o;
      if (!p.at("target").is_null()) {
        o.target = p.at("target").get<std::string>() == "hard" ? ContrastTarget::Hard : ContrastTarget::Soft;
      }
      o.sigma = p.at("sigma").get<double>();
      return contrast_g(models[0], models[1], regularizer(p, data), o);
    }
    case Scenario::Risky: {
      RiskyOptions o;
      o.mode = p.at("mode").get<std::string>() == "entropy" ? RiskyMode::Entropy : RiskyMode::Norm;
      o.alpha = p.at("alpha").get<double>();
      o.r = p.at("power").get<double>();
      o.output = output_target(p);
      return risky_g(models[0], o, regularizer(p, data));
    }
    case Scenario::ParamSensitive: {
      const ParamEnsemble ensemble = draw_param_ensemble(*models[0], p.at("sigma_theta").get<double>(),
                                                         p.at("ensemble_size").get<int>(), ensemble_seed);
      if (models[0]->is_classifier()) return param_sensitive_g(ensemble, models[0], regularizer(p, data));
      return regression_sensitive_g(ensemble, models[0], p.at("sigma").get<double>(), regularizer(p, data));
    }
    case Scenario::WinePin: {
      const int cls = p.at("pin_class").get<int>();
      if (cls >= models[1]->num_classes()) throw ArityError("pin_class is not a class of the pin model");
      ProbeFunction g({{1.0, std::make_shared<NegativeEntropyTerm>(models[0])}});
      return g.with_term(certainty_pin_g(models[1], cls, p.at("pin_weight").get<double>()));
    }
    case Scenario::Latent: {
      const json& inner = p.at("inner");
      return build_energy(scenario_from_string(inner.at("kind").get<std::string>()), inner, models, data,
                          ensemble_seed);
    }
  }
  throw SpecError("unknown scenario");
}

// Standardizing map with zero spreads replaced by 1.
std::shared_ptr<const LatentMap> standardizer(const Dataset& data, Vector& center, Vector& scale) {
  center = data.feature_mean();
  scale = data.feature_std();
  for (Eigen::Index j = 0; j < scale.size(); ++j) {
    if (!(scale[j] > 0.0)) scale[j] = 1.0;
  }
  return std::make_shared<const LatentMap>(LatentMap::standardizing(center, scale));
}

std::optional<Bounds> build_bounds(const BoundsSpec& spec, const Dataset& data, const json& anchor) {
  if (spec.empty()) return std::nullopt;
  Bounds b = spec.observed ? data.observed_range() : Bounds::unbounded(data.dimension());
  const auto& names = data.feature_names();
  for (const auto& f : spec.features) {
    const auto it = std::find(names.begin(), names.end(), f.feature);
    if (it == names.end()) throw PreconditionError("bounds: unknown feature '" + f.feature + "'");
    const auto j = it - names.begin();
    auto value = [&](const json& v, double keep) {
      if (v.is_null()) return keep;
      if (v.is_string()) {
        if (v.get<std::string>() != "anchor") throw PreconditionError("bounds: expected a number or \"anchor\"");
        if (anchor.is_null()) throw PreconditionError("bounds: \"anchor\" used without a scenario anchor");
        return anchor_vector(anchor, data)[j];
      }
      return v.get<double>();
    };
    b.lo[j] = value(f.lo, b.lo[j]);
    b.hi[j] = value(f.hi, b.hi[j]);
  }
  return Bounds(b.lo, b.hi);
}

const json& scenario_anchor(Scenario s, const json& p) {
  static const json none;
  if (s == Scenario::Latent) return scenario_anchor(scenario_from_string(p.at("inner").at("kind").get<std::string>()),
                                                    p.at("inner"));
  if (s == Scenario::WinePin) return none;
  return p.at("anchor");
}

std::vector<Vector> starting_points(const ProbeSpec& spec, const Dataset& data, const std::vector<PredictorPtr>& models) {
  const auto chains = static_cast<std::size_t>(spec.chains);
  std::vector<Vector> pool;
  const std::string& kind = spec.init.kind;
  if (kind == "mean") {
    pool.push_back(data.feature_mean());
  } else if (kind == "anchor") {
    const json& anchor = scenario_anchor(spec.scenario, spec.scenario_params);
    if (anchor.is_null()) throw PreconditionError("init: anchor start without a scenario anchor");
    pool.push_back(anchor_vector(anchor, data));
  } else if (kind == "points") {
    const bool pinned = spec.scenario == Scenario::WinePin;
    const int pin = pinned ? spec.scenario_params.at("pin_class").get<int>() : -1;
    for (const auto& pt : data.points()) {
      if (spec.init.label && (!pt.label || *pt.label != static_cast<double>(*spec.init.label))) continue;
      if (pinned && models[1]->predict_proba(pt.features)[pin] != 1.0) continue;
      pool.push_back(pt.features);
      if (pool.size() == chains) break;
    }
    if (pool.empty()) throw PreconditionError("init: no training point matches the start filter");
  } else {
    for (const auto& v : spec.init.vectors) pool.push_back(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  std::vector<Vector> starts;
  for (std::size_t i = 0; i < chains; ++i) starts.push_back(pool[i % pool.size()]);
  return starts;
}

// ---------------------------------------------------------------------------
// Reporting

void add_stats(ProbeReport& rep, const ProbeSpec& spec, const std::vector<PredictorPtr>& models,
               const std::optional<Bounds>& bounds, const Dataset& data) {
  rep.stats["chains"] = spec.chains;
  const Eigen::Index n = rep.samples.rows();
  if (n == 0) return;
  const double inv = 1.0 / static_cast<double>(n);
  auto share = [&](long count) { return static_cast<double>(count) / static_cast<double>(n); };
  auto sample = [&](Eigen::Index i) -> Vector { return rep.samples.row(i).transpose(); };

  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& model = *models[m];
    const std::string prefix = "model" + std::to_string(m) + "_";
    if (model.is_classifier()) {
      std::vector<long> wins(model.num_classes(), 0);
      Vector proba = Vector::Zero(model.num_classes());
      for (Eigen::Index i = 0; i < n; ++i) {
        const Vector q = model.predict_proba(sample(i));
        Eigen::Index k = 0;
        q.maxCoeff(&k);
        ++wins[k];
        proba += q;
      }
      for (int k = 0; k < model.num_classes(); ++k) {
        rep.stats[prefix + "class" + std::to_string(k) + "_fraction"] = share(wins[k]);
        rep.stats[prefix + "class" + std::to_string(k) + "_mean_proba"] = inv * proba[k];
      }
    } else {
      double mean = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) mean += inv * model.predict(sample(i));
      rep.stats[prefix + "mean_prediction"] = mean;
    }
  }

  Scenario s = spec.scenario;
  const json* p = &spec.scenario_params;
  if (s == Scenario::Latent) {
    p = &spec.scenario_params.at("inner");
    s = scenario_from_string(p->at("kind").get<std::string>());
  }
  if (s == Scenario::Contrast) {
    if (models[0]->is_classifier()) {
      long differ = 0;
      for (Eigen::Index i = 0; i < n; ++i) differ += models[0]->predict(sample(i)) != models[1]->predict(sample(i));
      rep.stats["disagreement_rate"] = share(differ);
    } else {
      double gap = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) gap += std::abs(models[0]->predict(sample(i)) - models[1]->predict(sample(i)));
      rep.stats["mean_abs_difference"] = inv * gap;
    }
  } else if (s == Scenario::FixedLabel) {
    const double target = p->at("y_prime").get<double>();
    if (models[0]->is_classifier()) {
      long hit = 0;
      for (Eigen::Index i = 0; i < n; ++i) hit += models[0]->predict(sample(i)) == target;
      rep.stats["target_label_fraction"] = share(hit);
    } else {
      double err = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) err += std::abs(models[0]->predict(sample(i)) - target);
      rep.stats["mean_abs_error_to_target"] = inv * err;
    }
  } else if (s == Scenario::Risky && models[0]->num_classes() == 2) {
    double margin = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) margin += inv * std::abs(models[0]->decision_value(sample(i)));
    rep.stats["mean_abs_decision"] = margin;
  } else if (s == Scenario::WinePin) {
    const int pin = p->at("pin_class").get<int>();
    long certain = 0;
    for (Eigen::Index i = 0; i < n; ++i) certain += models[1]->predict_proba(sample(i))[pin] == 1.0;
    rep.stats["pin_certain_fraction"] = share(certain);
  }

  double norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) norm += inv * rep.samples.row(i).norm();
  rep.stats["mean_norm"] = norm;
  const json& anchor = scenario_anchor(spec.scenario, spec.scenario_params);
  if (!anchor.is_null()) {
    const Vector a = anchor_vector(anchor, data);
    double dist = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) dist += inv * (sample(i) - a).norm();
    rep.stats["mean_anchor_distance"] = dist;
  }
  if (bounds) {
    long inside = 0;
    for (Eigen::Index i = 0; i < n; ++i) inside += bounds->contains(sample(i));
    rep.stats["within_bounds_fraction"] = share(inside);
  }
}

CsvDocument plot_document(const Dataset& data, const ProbeReport& rep) {
  CsvDocument doc;
  doc.header = {"feature", "value", "source"};
  const auto& names = data.feature_names();
  for (const auto& pt : data.points()) {
    for (Eigen::Index j = 0; j < pt.features.size(); ++j) doc.rows.push_back({names[j], format_double(pt.features[j]), "train"});
  }
  for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
    for (Eigen::Index j = 0; j < rep.samples.cols(); ++j) {
      doc.rows.push_back({names[j], format_double(rep.samples(i, j)), "generated"});
    }
  }
  return doc;
}

/// Files written so far; removed again unless commit() is called.
class OutputTransaction {
 public:
  explicit OutputTransaction(const fs::path& dir) : dir_(dir) {
    if (!fs::exists(dir_)) {
      fs::create_directories(dir_);
      created_dir_ = true;
    }
  }
  OutputTransaction(const OutputTransaction&) = delete;
  OutputTransaction& operator=(const OutputTransaction&) = delete;

  ~OutputTransaction() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }

  void write_text(const std::string& name, const std::string& text) {
    const fs::path path = add(name);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }

  const std::vector<fs::path>& files() const { return files_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  bool created_dir_ = false;
  bool committed_ = false;
  std::vector<fs::path> files_;
};

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::FixedLabel: return "fixed-label";
    case Scenario::Contrast: return "contrast";
    case Scenario::Risky: return "risky";
    case Scenario::ParamSensitive: return "param-sensitive";
    case Scenario::WinePin: return "wine-pin";
    case Scenario::Latent: return "latent";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& s) {
  for (Scenario v : {Scenario::FixedLabel, Scenario::Contrast, Scenario::Risky, Scenario::ParamSensitive,
                     Scenario::WinePin, Scenario::Latent}) {
    if (to_string(v) == s) return v;
  }
  throw config_error("unknown scenario '" + s + "'");
}

json ProbeSpec::to_json() const {
  json j;
  j["format_version"] = kSpecVersion;
  j["seed"] = seed;
  json d;
  if (!dataset.csv.empty()) {
    d["csv"] = dataset.csv.string();
    if (!dataset.schema.empty()) d["schema"] = dataset.schema.string();
    if (dataset.classification) d["classification"] = *dataset.classification;
  } else {
    d["generator"] = dataset.generator;
    d["params"] = dataset.params;
    d["seed"] = dataset.seed.value_or(derive_seed(seed, kDataStream));
  }
  j["dataset"] = d;
  json models_json = json::array();
  for (const auto& m : models) {
    if (!m.path.empty()) {
      models_json.push_back({{"path", m.path.string()}});
    } else {
      models_json.push_back({{"kind", m.kind}, {"params", m.params}});
    }
  }
  j["models"] = models_json;
  json scen = scenario_params;
  scen["kind"] = to_string(scenario);
  j["scenario"] = scen;
  json c = chain.to_json();
  c.erase("seed");
  c.erase("bounds");
  if (!gradient_mode_set) c.erase("gradient_mode");
  j["chain"] = c;
  j["chains"] = chains;
  j["threads"] = threads;
  j["init"] = {{"kind", init.kind},
               {"label", init.label ? json(*init.label) : json()},
               {"vectors", init.vectors}};
  json features = json::object();
  for (const auto& f : bounds.features) features[f.feature] = {{"lo", f.lo}, {"hi", f.hi}};
  j["bounds"] = {{"observed", bounds.observed}, {"features", features}};
  return j;
}

ProbeSpec parse_spec(const json& document, const fs::path& base_dir) {
  try {
    const json& j = document.contains("manifest_version") ? document.at("spec") : document;
    if (!j.is_object()) throw config_error("spec must be a JSON object");
    static const std::vector<std::string> top{"format_version", "seed",  "dataset", "models", "scenario", "chain",
                                              "chains",         "threads", "init",  "bounds", "output"};
    for (const auto& [key, value] : j.items()) {
      if (std::find(top.begin(), top.end(), key) == top.end()) throw config_error("unknown top-level key '" + key + "'");
    }
    if (!j.contains("format_version")) throw config_error("missing format_version");
    if (j.at("format_version").get<int>() != kSpecVersion) {
      throw config_error("unsupported format_version " + j.at("format_version").dump());
    }
    ProbeSpec spec;
    spec.seed = j.value("seed", std::uint64_t{0});

    // dataset
    if (!j.contains("dataset")) throw config_error("missing dataset section");
    const json& d = j.at("dataset");
    if (d.contains("csv")) {
      const json r = resolve("dataset", d, {{"csv", nullptr, true}, {"schema", nullptr}, {"classification", nullptr}});
      spec.dataset.csv = resolve_path(r.at("csv").get<std::string>(), base_dir);
      if (!r.at("schema").is_null()) spec.dataset.schema = resolve_path(r.at("schema").get<std::string>(), base_dir);
      if (!r.at("classification").is_null()) spec.dataset.classification = r.at("classification").get<bool>();
    } else {
      const json r = resolve("dataset", d, {{"generator", nullptr, true}, {"params", json::object()}, {"seed", nullptr}});
      spec.dataset.generator = r.at("generator").get<std::string>();
      const auto gens = dataset_generators();
      if (std::find(gens.begin(), gens.end(), spec.dataset.generator) == gens.end()) {
        throw config_error("unknown dataset generator '" + spec.dataset.generator + "'");
      }
      spec.dataset.params = r.at("params");
      if (!spec.dataset.params.is_object()) throw config_error("dataset params must be an object");
      if (!r.at("seed").is_null()) spec.dataset.seed = r.at("seed").get<std::uint64_t>();
    }

    // models
    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty()) {
      throw config_error("models must be a non-empty array");
    }
    for (std::size_t i = 0; i < j.at("models").size(); ++i) {
      const json& m = j.at("models").at(i);
      const std::string what = "models[" + std::to_string(i) + "]";
      ModelSection section;
      if (m.contains("path")) {
        const json r = resolve(what, m, {{"path", nullptr, true}});
        section.path = resolve_path(r.at("path").get<std::string>(), base_dir);
      } else {
        const json r = resolve(what, m, {{"kind", nullptr, true}, {"params", json::object()}});
        section.kind = r.at("kind").get<std::string>();
        section.params = resolve_model_params(section.kind, r.at("params"), derive_seed(spec.seed, kModelStream + i));
        if (model_kind_from_string(section.kind) == ModelKind::KernelSvm) (void)svm_options(section.params);
      }
      spec.models.push_back(std::move(section));
    }

    // scenario
    if (!j.contains("scenario") || !j.at("scenario").is_object() || !j.at("scenario").contains("kind")) {
      throw config_error("scenario needs a kind");
    }
    json scen = j.at("scenario");
    spec.scenario = scenario_from_string(scen.at("kind").get<std::string>());
    scen.erase("kind");
    spec.scenario_params = resolve_scenario(spec.scenario, scen);
    const int needed = models_needed(spec.scenario, spec.scenario_params);
    if (static_cast<int>(spec.models.size()) != needed) {
      throw config_error("scenario '" + to_string(spec.scenario) + "' needs " + std::to_string(needed) +
                         " model(s), got " + std::to_string(spec.models.size()));
    }

    // chain
    const json chain = j.value("chain", json::object());
    if (!chain.is_object()) throw config_error("chain must be an object");
    for (const auto& [key, value] : chain.items()) {
      static const std::vector<std::string> keys{"tau",      "step_size",     "n_steps", "burn_in",
                                                 "thinning", "gradient_mode", "smoothing"};
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        throw config_error("chain: unknown key '" + key + "' (seed and bounds are top-level)");
      }
    }
    spec.chain = ChainConfig::from_json(chain);
    spec.gradient_mode_set = chain.contains("gradient_mode");
    if (!spec.chain.burn_in) spec.chain.burn_in = spec.chain.effective_burn_in();
    spec.chains = j.value("chains", 1);
    spec.threads = j.value("threads", 1);
    if (spec.chains < 1) throw config_error("chains must be >= 1");
    if (spec.threads < 1) throw config_error("threads must be >= 1");

    // init
    json init = j.value("init", json::object());
    if (init.is_string()) init = json{{"kind", init}};
    const json r = resolve("init", init,
                           {{"kind", spec.scenario == Scenario::WinePin ? "points" : "mean"},
                            {"label", nullptr},
                            {"vectors", json::array()}});
    spec.init.kind = r.at("kind").get<std::string>();
    check_choice("init kind", spec.init.kind, {"mean", "anchor", "points", "vectors"});
    if (!r.at("label").is_null()) {
      spec.init.label = r.at("label").get<int>();
    } else if (spec.scenario == Scenario::WinePin && spec.init.kind == "points") {
      spec.init.label = spec.scenario_params.at("pin_class").get<int>();
    }
    spec.init.vectors = r.at("vectors").get<std::vector<std::vector<double>>>();
    if (spec.init.kind == "vectors" && spec.init.vectors.empty()) throw config_error("init: vectors is empty");
    if (spec.init.kind == "anchor" && scenario_anchor(spec.scenario, spec.scenario_params).is_null()) {
      throw config_error("init: anchor start needs a scenario anchor");
    }

    // bounds
    const json b = resolve("bounds", j.value("bounds", json::object()), {{"observed", false}, {"features", json::object()}});
    spec.bounds.observed = b.at("observed").get<bool>();
    if (!b.at("features").is_object()) throw config_error("bounds features must be an object keyed by feature name");
    for (const auto& [name, range] : b.at("features").items()) {
      const json fr = resolve("bounds feature '" + name + "'", range, {{"lo", nullptr}, {"hi", nullptr}});
      for (const char* side : {"lo", "hi"}) {
        const json& v = fr.at(side);
        if (!v.is_null() && !v.is_number() && !(v.is_string() && v.get<std::string>() == "anchor")) {
          throw config_error("bounds feature '" + name + "': " + side + " must be a number, \"anchor\" or null");
        }
      }
      spec.bounds.features.push_back({name, fr.at("lo"), fr.at("hi")});
    }

    if (general_latent_map(spec.scenario, spec.scenario_params)) {
      if (spec.init.kind != "vectors") throw config_error("latent scenario with an explicit map needs init vectors");
      if (!spec.bounds.empty()) throw config_error("latent scenario with an explicit map does not take bounds");
    }

    const json out = j.value("output", json::object());
    spec.output_dir = resolve_path(out.value("dir", std::string("probe-out")), base_dir);
    return spec;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
}

ProbeSpec load_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw config_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_spec(j, fs::absolute(path).parent_path());
}

Dataset load_data(const ProbeSpec& spec) {
  return in_stage("data", kExitConfig, [&] {
    const auto& src = spec.dataset;
    if (!src.csv.empty()) {
      if (!src.schema.empty()) {
        std::ifstream in(src.schema);
        if (!in) throw IoError("cannot open schema '" + src.schema.string() + "'");
        return load_dataset(src.csv, schema_from_json(json::parse(in)));
      }
      return read_numeric_dataset(src.csv, src.classification);
    }
    return make_dataset(src.generator, src.params, src.seed.value_or(derive_seed(spec.seed, kDataStream)));
  });
}

std::vector<PredictorPtr> build_models(const ProbeSpec& spec, const Dataset& data) {
  return in_stage("train", kExitTraining, [&] {
    std::vector<PredictorPtr> models;
    for (const auto& m : spec.models) {
      auto model = train_model(m, data);
      if (model->input_dim() != data.dimension()) {
        throw PreconditionError("model expects " + std::to_string(model->input_dim()) + " features, data has " +
                                std::to_string(data.dimension()));
      }
      log().info("model {}: {}", models.size(), to_string(model->kind()));
      models.push_back(std::move(model));
    }
    return models;
  });
}

std::vector<fs::path> train_models(const ProbeSpec& spec, const fs::path& dir) {
  const Dataset data = load_data(spec);
  const auto models = build_models(spec, data);
  return in_stage("write", kExitTraining, [&] {
    OutputTransaction out(dir);
    for (std::size_t i = 0; i < models.size(); ++i) save_predictor(*models[i], out.add("model" + std::to_string(i) + ".json"));
    out.commit();
    return out.files();
  });
}

RunResult run(const ProbeSpec& spec_in) {
  ProbeSpec spec = spec_in;
  const Dataset data = load_data(spec);
  const auto models = build_models(spec, data);
  const std::uint64_t ensemble_seed = derive_seed(spec.seed, kEnsembleStream);

  ProbeFunction g = in_stage("probe", kExitConfig, [&] {
    return build_energy(spec.scenario, spec.scenario_params, models, data, ensemble_seed);
  });

  std::optional<Bounds> bounds;
  ChainConfig cfg = spec.chain;
  ProbeReport rep = in_stage("sample", kExitSampling, [&] {
    bounds = build_bounds(spec.bounds, data, scenario_anchor(spec.scenario, spec.scenario_params));
    cfg.seed = derive_seed(spec.seed, kChainStream);
    if (!spec.gradient_mode_set) {
      cfg.gradient_mode = g.natural_mode();
      spec.chain.gradient_mode = cfg.gradient_mode;
      spec.gradient_mode_set = true;
    }

    std::shared_ptr<const LatentMap> phi;
    Vector center, scale;
    const bool latent = spec.scenario == Scenario::WinePin || spec.scenario == Scenario::Latent;
    if (general_latent_map(spec.scenario, spec.scenario_params)) {
      phi = std::make_shared<const LatentMap>(LatentMap::from_json(spec.scenario_params.at("map")));
    } else if (latent) {
      phi = standardizer(data, center, scale);
    }

    std::vector<Vector> starts = starting_points(spec, data, models);
    if (bounds) {
      for (auto& x : starts) x = bounds->clip(x);
    }
    if (phi && center.size() > 0) {
      for (auto& x : starts) x = (x - center).cwiseQuotient(scale);
      if (bounds) cfg.bounds = standardize_bounds(*bounds, center, scale);
    } else {
      cfg.bounds = bounds;
    }

    if (phi) {
      const ProbeFunction h = pushforward_probe(g, phi);
      return push_samples(run_chains(starts, h, cfg, spec.threads), *phi, data.feature_names());
    }
    ProbeReport r = run_chains(starts, g, cfg, spec.threads);
    r.feature_names = data.feature_names();
    return r;
  });
  in_stage("sample", kExitSampling, [&] { add_stats(rep, spec, models, bounds, data); });

  json seeds;
  seeds["master"] = spec.seed;
  if (spec.dataset.csv.empty()) seeds["data"] = spec.dataset.seed.value_or(derive_seed(spec.seed, kDataStream));
  json model_seeds = json::array();
  for (const auto& m : spec.models) {
    model_seeds.push_back(m.params.contains("seed") ? m.params.at("seed") : json());
  }
  seeds["models"] = model_seeds;
  seeds["ensemble"] = ensemble_seed;
  seeds["chain_base"] = cfg.seed;
  json chain_seeds = json::array();
  for (int i = 0; i < spec.chains; ++i) chain_seeds.push_back(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
  seeds["chains"] = chain_seeds;

  json manifest;
  manifest["manifest_version"] = kManifestVersion;
  manifest["tool"] = std::string("probekit ") + PROBEKIT_VERSION;
  manifest["spec"] = spec.to_json();
  manifest["seeds"] = seeds;
  manifest["dataset"] = {{"rows", data.size()},
                         {"dimension", data.dimension()},
                         {"num_classes", data.num_classes()},
                         {"feature_names", data.feature_names()}};
  manifest["outputs"] = {"samples.csv", "stats.json", "plot.csv"};

  return in_stage("write", kExitSampling, [&] {
    OutputTransaction out(spec.output_dir);
    rep.write_csv(out.add("samples.csv"));
    out.write_text("stats.json", stats_json(rep).dump(2) + "\n");
    std::ostringstream plot;
    write_csv(plot, plot_document(data, rep));
    out.write_text("plot.csv", plot.str());
    out.write_text("manifest.json", manifest.dump(2) + "\n");
    out.commit();
    return RunResult{rep, manifest, out.files()};
  });
}

ProbeReport report_from_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  if (in.peek() == std::ifstream::traits_type::eof()) return ProbeReport::from_samples(Matrix(0, 0), {});
  const CsvDocument doc = parse_csv(in);
  Matrix samples(static_cast<Eigen::Index>(doc.rows.size()), static_cast<Eigen::Index>(doc.header.size()));
  for (std::size_t i = 0; i < doc.rows.size(); ++i) {
    if (doc.rows[i].size() != doc.header.size()) {
      throw IoError("row " + std::to_string(i + 1) + " has " + std::to_string(doc.rows[i].size()) + " cells, header has " +
                    std::to_string(doc.header.size()));
    }
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
      const std::string& cell = doc.rows[i][c];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cell.size()) {
        throw IoError("row " + std::to_string(i + 1) + ", column '" + doc.header[c] + "': not a number");
      }
      samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return ProbeReport::from_samples(std::move(samples), doc.header);
}

json stats_json(const ProbeReport& report) {
  json j = report.to_json();
  j.erase("samples");
  return j;
}

json OracleCheck::to_json() const {
  return {{"max_mean_error_se", max_mean_z},
          {"covariance_relative_error", covariance_error},
          {"identity_relative_error", identity_error},
          {"acceptance_rate", acceptance},
          {"pass", pass}};
}

OracleCheck verify_oracle(const OracleOptions& o) {
  const Dataset data = in_stage("data", kExitConfig, [&] { return linear_gaussian(o.n, o.d, 0.5, o.seed); });
  return in_stage("sample", kExitSampling, [&] {
    const LrSummary s = lr_summary(data);
    const double w = s.mean_yhat + o.offset;
    const GaussianPosterior truth = lr_data_posterior(data, w, o.tau);

    ChainConfig cfg;
    cfg.tau = Temperature(o.tau);
    cfg.step_size = o.step_size;
    cfg.n_steps = o.steps;
    cfg.burn_in = o.steps / 20;
    cfg.seed = derive_seed(o.seed, kChainStream);
    const ProbeReport rep = run_chain(data.feature_mean(), lr_data_energy(data, w, o.tau), cfg);

    OracleCheck c;
    const Vector se = batch_means_standard_error(rep.samples, 50);
    c.max_mean_z = (rep.mean - truth.mean).cwiseQuotient(se).cwiseAbs().maxCoeff();
    c.covariance_error = relative_frobenius_error(sample_covariance(rep.samples), truth.covariance());
    const double cov_rel = (s.a * s.xi_hat - s.cov_xy).norm() / std::max(s.cov_xy.norm(), 1e-300);
    const double var_rel = std::abs(s.xi_hat.dot(s.a * s.xi_hat) - s.var_yhat) / std::max(s.var_yhat, 1e-300);
    c.identity_error = std::max(cov_rel, var_rel);
    c.acceptance = rep.acceptance_rate;
    c.pass = c.max_mean_z <= o.mean_standard_errors && c.covariance_error <= o.covariance_tolerance &&
             c.identity_error <= o.identity_tolerance;
    return c;
  });
}

}  // namespace probekit::driver
