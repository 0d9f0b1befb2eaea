#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "probekit/predictor.hpp"

namespace probekit {

/// Flat CART node. Internal nodes send x[feature] <= threshold to `left`.
/// Children always have larger indices than their parent.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> proba;  // leaves only
  int samples = 0;

  bool is_leaf() const { return feature < 0; }
};

class DecisionTree final : public Predictor {
 public:
  DecisionTree(std::vector<TreeNode> nodes, int input_dim, int num_classes);

  ModelKind kind() const override { return ModelKind::DecisionTree; }
  int input_dim() const override { return input_dim_; }
  int num_classes() const override { return num_classes_; }
  bool differentiable() const override { return false; }

  Vector predict_proba(const Vector& x) const override;
  double decision_value(const Vector& x) const override;
  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  nlohmann::json to_json() const override;

  /// Node indices visited from the root to the leaf that holds x.
  std::vector<int> decision_path(const Vector& x) const;
  int leaf_index(const Vector& x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
  int input_dim_;
  int num_classes_;
};

class RandomForest final : public Predictor {
 public:
  explicit RandomForest(std::vector<std::shared_ptr<const DecisionTree>> trees);

  ModelKind kind() const override { return ModelKind::RandomForest; }
  int input_dim() const override { return trees_.front()->input_dim(); }
  int num_classes() const override { return trees_.front()->num_classes(); }
  bool differentiable() const override { return false; }

  /// Mean of the member trees' leaf distributions.
  Vector predict_proba(const Vector& x) const override;
  double decision_value(const Vector& x) const override;
  RawEvaluation evaluate_raw(const Vector& x, bool with_jacobian) const override;
  nlohmann::json to_json() const override;

  const std::vector<std::shared_ptr<const DecisionTree>>& trees() const { return trees_; }

 private:
  std::vector<std::shared_ptr<const DecisionTree>> trees_;
};

struct TreeOptions {
  int max_depth = 32;
  int min_samples_split = 2;
  int max_features = 0;  // features tried per split; 0 means all
  std::uint64_t seed = 0;
};

struct ForestOptions {
  int n_trees = 100;
  int max_depth = 32;
  int min_samples_split = 2;
  int max_features = 0;  // 0 means floor(sqrt(d))
  std::uint64_t seed = 0;
  int threads = 1;
};

/// CART with Gini impurity. Throws SpecError when max_depth < 1.
std::shared_ptr<const DecisionTree> fit_tree(const Dataset& data, const TreeOptions& options = {});
/// Bootstrap-aggregated CART trees with per-split feature subsampling. The
/// result depends only on the seed, not on the thread count.
std::shared_ptr<const RandomForest> fit_forest(const Dataset& data, const ForestOptions& options = {});

}  // namespace probekit
