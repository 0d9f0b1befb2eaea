#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "probekit/encoding_map.hpp"

namespace probekit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One labelled or unlabelled observation in model units (post-encoding).
struct DataPoint {
  Vector features;
  std::optional<double> label;
};

/// Per-feature closed box [lo, hi].
struct Bounds {
  Vector lo;
  Vector hi;

  Bounds() = default;
  Bounds(Vector lo_, Vector hi_);

  int dimension() const { return static_cast<int>(lo.size()); }
  bool contains(const Vector& x) const;
  Vector clip(const Vector& x) const;
  /// Unbounded box of dimension `d`.
  static Bounds unbounded(int d);
};

/// Immutable in-memory dataset. All points share one dimension; class labels,
/// when the dataset is a classification set, lie in {0, ..., K-1}.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<DataPoint> points, std::vector<std::string> feature_names,
          EncodingMap encoding = {}, std::optional<Bounds> bounds = std::nullopt,
          int num_classes = 0);

  /// Builds a dataset from a feature matrix (rows are points) and a label vector.
  static Dataset from_matrix(const Matrix& features, const Vector& labels,
                             std::vector<std::string> feature_names = {}, int num_classes = 0);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  int dimension() const { return dimension_; }
  /// 0 for regression targets.
  int num_classes() const { return num_classes_; }
  bool has_labels() const;

  const std::vector<DataPoint>& points() const { return points_; }
  const DataPoint& operator[](std::size_t i) const { return points_[i]; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  const EncodingMap& encoding() const { return encoding_; }
  const std::optional<Bounds>& bounds() const { return bounds_; }

  Matrix feature_matrix() const;
  Vector label_vector() const;
  std::vector<int> class_labels() const;
  Vector feature_mean() const;
  Vector feature_std() const;
  Bounds observed_range() const;

  Dataset with_bounds(std::optional<Bounds> bounds) const;
  Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  std::vector<DataPoint> points_;
  std::vector<std::string> feature_names_;
  EncodingMap encoding_;
  std::optional<Bounds> bounds_;
  int dimension_ = 0;
  int num_classes_ = 0;
};

/// Named contiguous block of a flat parameter vector.
struct ParamSegment {
  std::string name;
  int offset = 0;
  int length = 0;
};

/// Flat parameter vector plus a layout mapping blocks to model structure.
class ParamVector {
 public:
  ParamVector() = default;
  ParamVector(Vector theta, std::vector<ParamSegment> layout);

  const Vector& theta() const { return theta_; }
  const std::vector<ParamSegment>& layout() const { return layout_; }
  int size() const { return static_cast<int>(theta_.size()); }

  /// Same layout, different values.
  ParamVector with_theta(Vector theta) const;
  Eigen::Map<const Vector> segment(const std::string& name) const;

 private:
  Vector theta_;
  std::vector<ParamSegment> layout_;
};

/// Strictly positive Gibbs temperature.
class Temperature {
 public:
  explicit Temperature(double tau);
  double value() const { return tau_; }

 private:
  double tau_;
};

}  // namespace probekit
