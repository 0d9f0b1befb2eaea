#include "probekit/serialize.hpp"

#include <fstream>

#include "probekit/errors.hpp"
#include "probekit/linear_models.hpp"
#include "probekit/mlp.hpp"
#include "probekit/svm.hpp"
#include "probekit/tree.hpp"

namespace probekit {

namespace {

Vector vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

InputScaler scaler_from(const nlohmann::json& j) { return {vec(j.at("mean")), vec(j.at("scale"))}; }

std::shared_ptr<const DecisionTree> tree_from(const nlohmann::json& j) {
  std::vector<TreeNode> nodes;
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.samples = n.value("samples", 0);
    if (n.contains("proba")) {
      node.proba = n["proba"].get<std::vector<double>>();
    } else {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    nodes.push_back(std::move(node));
  }
  return std::make_shared<DecisionTree>(std::move(nodes), j.at("input_dim").get<int>(),
                                        j.at("num_classes").get<int>());
}

}  // namespace

PredictorPtr predictor_from_json(const nlohmann::json& j) {
  try {
    if (j.contains("format")) {
      if (j["format"] != "probekit-model") throw IoError("model document: unexpected format tag");
      const int version = j.at("version").get<int>();
      if (version != kModelFormatVersion) {
        throw IoError("model document: unsupported version " + std::to_string(version));
      }
    }
    switch (model_kind_from_string(j.at("kind").get<std::string>())) {
      case ModelKind::LinearRegression:
        return std::make_shared<LinearRegression>(vec(j.at("coef")), j.at("intercept").get<double>());
      case ModelKind::LogisticRegression:
        return std::make_shared<LogisticRegression>(vec(j.at("weights")), j.at("bias").get<double>(),
                                                    scaler_from(j.at("scaler")));
      case ModelKind::Mlp: {
        std::vector<Mlp::Layer> layers;
        for (const auto& l : j.at("layers")) {
          const auto rows = l.at("rows").get<Eigen::Index>(), cols = l.at("cols").get<Eigen::Index>();
          const Vector w = vec(l.at("weight"));
          if (w.size() != rows * cols) throw IoError("model document: mlp weight size");
          layers.push_back({Eigen::Map<const Matrix>(w.data(), rows, cols), vec(l.at("bias"))});
        }
        return std::make_shared<Mlp>(std::move(layers), scaler_from(j.at("scaler")), j.at("classifier").get<bool>(),
                                     j.value("dropout_rate", 0.0));
      }
      case ModelKind::KernelSvm: {
        const auto& k = j.at("kernel");
        Kernel kernel;
        kernel.type = k.at("type") == "rbf" ? Kernel::Type::Rbf : Kernel::Type::Polynomial;
        kernel.gamma = k.at("gamma").get<double>();
        kernel.degree = k.at("degree").get<int>();
        kernel.coef = k.at("coef").get<double>();
        const Vector coef = vec(j.at("dual_coef"));
        const Vector flat = vec(j.at("support_vectors"));
        const auto d = j.at("input_dim").get<Eigen::Index>();
        if (flat.size() != coef.size() * d) throw IoError("model document: svm support vector size");
        Matrix sv = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            flat.data(), coef.size(), d);
        return std::make_shared<KernelSvm>(kernel, std::move(sv), coef, j.at("bias").get<double>(),
                                           j.at("regression").get<bool>());
      }
      case ModelKind::DecisionTree:
        return tree_from(j);
      case ModelKind::RandomForest: {
        std::vector<std::shared_ptr<const DecisionTree>> trees;
        for (const auto& t : j.at("trees")) trees.push_back(tree_from(t));
        return std::make_shared<RandomForest>(std::move(trees));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model document: ") + e.what());
  }
  throw IoError("model document: unknown kind");
}

void save_predictor(const Predictor& p, const std::filesystem::path& path) {
  nlohmann::json j = p.to_json();
  j["format"] = "probekit-model";
  j["version"] = kModelFormatVersion;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

PredictorPtr load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
  return predictor_from_json(j);
}

}  // namespace probekit
