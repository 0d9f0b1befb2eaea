#include "probekit/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "probekit/errors.hpp"
#include "probekit/rng.hpp"

namespace probekit {

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, int input_dim, int num_classes)
    : nodes_(std::move(nodes)), input_dim_(input_dim), num_classes_(num_classes) {
  if (nodes_.empty()) throw SpecError("tree: no nodes");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      if (static_cast<int>(n.proba.size()) != num_classes_) throw SpecError("tree: leaf distribution size");
      double s = 0;
      for (double p : n.proba) s += p;
      if (std::abs(s - 1.0) > 1e-9) throw SpecError("tree: leaf distribution does not sum to 1");
    } else {
      const auto self = static_cast<int>(i);
      if (n.feature >= input_dim_ || n.left <= self || n.right <= self ||
          n.left >= static_cast<int>(nodes_.size()) || n.right >= static_cast<int>(nodes_.size())) {
        throw SpecError("tree: node " + std::to_string(i) + " has invalid feature or child indices");
      }
    }
  }
}

int DecisionTree::leaf_index(const Vector& x) const {
  int at = 0;
  while (!nodes_[at].is_leaf()) {
    const auto& n = nodes_[at];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return at;
}

std::vector<int> DecisionTree::decision_path(const Vector& x) const {
  check_input(x);
  std::vector<int> path{0};
  while (!nodes_[path.back()].is_leaf()) {
    const auto& n = nodes_[path.back()];
    path.push_back(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return path;
}

int DecisionTree::depth() const {
  std::vector<int> level(nodes_.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) level[nodes_[i].left] = level[nodes_[i].right] = level[i] + 1;
  }
  return deepest;
}

Vector DecisionTree::predict_proba(const Vector& x) const {
  check_input(x);
  const auto& p = nodes_[leaf_index(x)].proba;
  return Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
}

double DecisionTree::decision_value(const Vector& x) const {
  if (num_classes_ != 2) throw ArityError("decision_value: tree is not binary");
  const Vector p = predict_proba(x);
  return p[1] - p[0];
}

RawEvaluation DecisionTree::evaluate_raw(const Vector& x, bool with_jacobian) const {
  if (with_jacobian) throw NotDifferentiableError("decision tree has no input Jacobian");
  return {predict_proba(x).array().max(1e-300).log().matrix(), {}};
}

nlohmann::json DecisionTree::to_json() const {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : nodes_) {
    if (n.is_leaf()) {
      nodes.push_back({{"proba", n.proba}, {"samples", n.samples}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"samples", n.samples}});
    }
  }
  return {{"kind", to_string(kind())}, {"input_dim", input_dim_}, {"num_classes", num_classes_}, {"nodes", nodes}};
}

RandomForest::RandomForest(std::vector<std::shared_ptr<const DecisionTree>> trees) : trees_(std::move(trees)) {
  if (trees_.empty()) throw SpecError("forest: no trees");
  for (const auto& t : trees_) {
    if (t->input_dim() != trees_.front()->input_dim() || t->num_classes() != trees_.front()->num_classes()) {
      throw SpecError("forest: member trees disagree on shape");
    }
  }
}

Vector RandomForest::predict_proba(const Vector& x) const {
  check_input(x);
  Vector sum = Vector::Zero(num_classes());
  for (const auto& t : trees_) {
    const auto& p = t->nodes()[t->leaf_index(x)].proba;
    for (int k = 0; k < num_classes(); ++k) sum[k] += p[k];
  }
  return sum / static_cast<double>(trees_.size());
}

double RandomForest::decision_value(const Vector& x) const {
  if (num_classes() != 2) throw ArityError("decision_value: forest is not binary");
  const Vector p = predict_proba(x);
  return p[1] - p[0];
}

RawEvaluation RandomForest::evaluate_raw(const Vector& x, bool with_jacobian) const {
  if (with_jacobian) throw NotDifferentiableError("random forest has no input Jacobian");
  return {predict_proba(x).array().max(1e-300).log().matrix(), {}};
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t->to_json());
  return {{"kind", to_string(kind())}, {"input_dim", input_dim()}, {"num_classes", num_classes()}, {"trees", trees}};
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<int>& y, int num_classes, const TreeOptions& opt)
      : x_(x), y_(y), k_(num_classes), opt_(opt), rng_(opt.seed) {}

  std::vector<TreeNode> build(std::vector<Eigen::Index> rows) {
    nodes_.clear();
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  std::vector<double> counts(const std::vector<Eigen::Index>& rows) const {
    std::vector<double> c(k_, 0.0);
    for (auto r : rows) c[y_[r]] += 1.0;
    return c;
  }

  static double gini(const std::vector<double>& c, double n) {
    if (n <= 0) return 0.0;
    double s = 0;
    for (double v : c) s += v * v;
    return 1.0 - s / (n * n);
  }

  int grow(std::vector<Eigen::Index>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const auto c = counts(rows);
    const double n = static_cast<double>(rows.size());
    nodes_[id].samples = static_cast<int>(rows.size());
    const bool pure = std::count_if(c.begin(), c.end(), [](double v) { return v > 0; }) <= 1;

    int best_feature = -1;
    double best_threshold = 0, best_score = gini(c, n) - 1e-12;
    if (!pure && depth < opt_.max_depth && static_cast<int>(rows.size()) >= opt_.min_samples_split) {
      std::vector<int> features(x_.cols());
      std::iota(features.begin(), features.end(), 0);
      int tries = static_cast<int>(features.size());
      if (opt_.max_features > 0 && opt_.max_features < tries) {
        // Partial Fisher-Yates: the first max_features entries are a uniform subset.
        for (int i = 0; i < opt_.max_features; ++i) {
          std::uniform_int_distribution<int> pick(i, tries - 1);
          std::swap(features[i], features[pick(rng_)]);
        }
        tries = opt_.max_features;
      }
      std::vector<std::pair<double, int>> column(rows.size());
      for (int fi = 0; fi < tries; ++fi) {
        const int f = features[fi];
        for (std::size_t r = 0; r < rows.size(); ++r) column[r] = {x_(rows[r], f), y_[rows[r]]};
        std::sort(column.begin(), column.end());
        std::vector<double> left(k_, 0.0), right = c;
        for (std::size_t r = 0; r + 1 < column.size(); ++r) {
          left[column[r].second] += 1.0;
          right[column[r].second] -= 1.0;
          if (column[r].first == column[r + 1].first) continue;
          const double nl = static_cast<double>(r + 1), nr = n - nl;
          const double score = (nl * gini(left, nl) + nr * gini(right, nr)) / n;
          if (score < best_score) {
            best_score = score;
            best_feature = f;
            best_threshold = 0.5 * (column[r].first + column[r + 1].first);
            if (best_threshold >= column[r + 1].first) best_threshold = column[r].first;
          }
        }
      }
    }

    if (best_feature < 0) {
      nodes_[id].proba.resize(k_);
      for (int k = 0; k < k_; ++k) nodes_[id].proba[k] = c[k] / n;
      return id;
    }
    std::vector<Eigen::Index> left_rows, right_rows;
    for (auto r : rows) (x_(r, best_feature) <= best_threshold ? left_rows : right_rows).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = grow(left_rows, depth + 1);
    const int r = grow(right_rows, depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  const Matrix& x_;
  const std::vector<int>& y_;
  int k_;
  TreeOptions opt_;
  std::mt19937_64 rng_;
  std::vector<TreeNode> nodes_;
};

void check_classification(const Dataset& data, int max_depth) {
  if (max_depth < 1) throw SpecError("tree: max_depth must be >= 1");
  if (data.num_classes() < 2) throw ArityError("tree: classification labels required");
  if (data.empty()) throw PreconditionError("tree: empty dataset");
}

}  // namespace

std::shared_ptr<const DecisionTree> fit_tree(const Dataset& data, const TreeOptions& options) {
  check_classification(data, options.max_depth);
  const Matrix x = data.feature_matrix();
  const auto y = data.class_labels();
  std::vector<Eigen::Index> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  TreeBuilder builder(x, y, data.num_classes(), options);
  return std::make_shared<DecisionTree>(builder.build(std::move(rows)), data.dimension(), data.num_classes());
}

std::shared_ptr<const RandomForest> fit_forest(const Dataset& data, const ForestOptions& options) {
  check_classification(data, options.max_depth);
  if (options.n_trees < 1) throw SpecError("forest: n_trees must be >= 1");
  const Matrix x = data.feature_matrix();
  const auto y = data.class_labels();
  const int d = data.dimension();
  const int mtry = options.max_features > 0
                       ? options.max_features
                       : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(d)))));
  const auto n = static_cast<Eigen::Index>(data.size());

  std::vector<std::shared_ptr<const DecisionTree>> trees(options.n_trees);
  auto grow_tree = [&](int t) {
    const std::uint64_t tree_seed = derive_seed(options.seed, static_cast<std::uint64_t>(t));
    std::mt19937_64 rng(tree_seed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    std::vector<Eigen::Index> rows(n);
    for (auto& r : rows) r = pick(rng);
    TreeOptions topt{options.max_depth, options.min_samples_split, mtry, splitmix64(tree_seed)};
    TreeBuilder builder(x, y, data.num_classes(), topt);
    trees[t] = std::make_shared<DecisionTree>(builder.build(std::move(rows)), d, data.num_classes());
  };

  const int threads = std::clamp(options.threads, 1, options.n_trees);
  if (threads == 1) {
    for (int t = 0; t < options.n_trees; ++t) grow_tree(t);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (int t = w; t < options.n_trees; t += threads) grow_tree(t);
      });
    }
  }
  return std::make_shared<RandomForest>(std::move(trees));
}

}  // namespace probekit
