#include "probekit/types.hpp"

#include <cmath>
#include <limits>

#include "probekit/errors.hpp"

namespace probekit {

Bounds::Bounds(Vector lo_, Vector hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw PreconditionError("bounds: lo and hi differ in length");
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!(lo[i] <= hi[i])) {
      throw PreconditionError("bounds: lo > hi at feature " + std::to_string(i));
    }
  }
}

bool Bounds::contains(const Vector& x) const {
  if (x.size() != lo.size()) return false;
  return ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
}

Vector Bounds::clip(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

Bounds Bounds::unbounded(int d) {
  const double inf = std::numeric_limits<double>::infinity();
  return Bounds(Vector::Constant(d, -inf), Vector::Constant(d, inf));
}

Dataset::Dataset(std::vector<DataPoint> points, std::vector<std::string> feature_names,
                 EncodingMap encoding, std::optional<Bounds> bounds, int num_classes)
    : points_(std::move(points)),
      feature_names_(std::move(feature_names)),
      encoding_(std::move(encoding)),
      bounds_(std::move(bounds)),
      num_classes_(num_classes) {
  if (num_classes_ < 0) throw PreconditionError("dataset: negative class count");
  if (!points_.empty()) {
    dimension_ = static_cast<int>(points_.front().features.size());
  } else if (!feature_names_.empty()) {
    dimension_ = static_cast<int>(feature_names_.size());
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (p.features.size() != dimension_) {
      throw PreconditionError("dataset: point " + std::to_string(i) + " has dimension " +
                              std::to_string(p.features.size()) + ", expected " +
                              std::to_string(dimension_));
    }
    if (num_classes_ > 0 && p.label) {
      const double y = *p.label;
      if (y != std::floor(y) || y < 0 || y >= num_classes_) {
        throw ArityError("dataset: label " + std::to_string(y) + " at point " + std::to_string(i) +
                         " outside {0.." + std::to_string(num_classes_ - 1) + "}");
      }
    }
  }
  if (feature_names_.empty()) {
    for (int j = 0; j < dimension_; ++j) feature_names_.push_back("x" + std::to_string(j));
  } else if (static_cast<int>(feature_names_.size()) != dimension_) {
    throw PreconditionError("dataset: feature_names length does not match dimension");
  }
  if (!encoding_.empty() && encoding_.encoded_dimension() != dimension_) {
    throw PreconditionError("dataset: encoding map does not match dimension");
  }
  if (bounds_) {
    if (bounds_->dimension() != dimension_) throw PreconditionError("dataset: bounds dimension");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!bounds_->contains(points_[i].features)) {
        throw PreconditionError("dataset: point " + std::to_string(i) + " violates bounds");
      }
    }
  }
}

Dataset Dataset::from_matrix(const Matrix& features, const Vector& labels,
                             std::vector<std::string> feature_names, int num_classes) {
  if (labels.size() != 0 && labels.size() != features.rows()) {
    throw PreconditionError("dataset: label count does not match row count");
  }
  std::vector<DataPoint> pts;
  pts.reserve(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    DataPoint p;
    p.features = features.row(i).transpose();
    if (labels.size() != 0) p.label = labels[i];
    pts.push_back(std::move(p));
  }
  if (feature_names.empty()) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) feature_names.push_back("x" + std::to_string(j));
  }
  return Dataset(std::move(pts), std::move(feature_names), {}, std::nullopt, num_classes);
}

bool Dataset::has_labels() const {
  if (points_.empty()) return false;
  for (const auto& p : points_) {
    if (!p.label) return false;
  }
  return true;
}

Matrix Dataset::feature_matrix() const {
  Matrix m(static_cast<Eigen::Index>(points_.size()), dimension_);
  for (std::size_t i = 0; i < points_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points_[i].features.transpose();
  return m;
}

Vector Dataset::label_vector() const {
  Vector y(static_cast<Eigen::Index>(points_.size()));
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].label) throw PreconditionError("dataset: point " + std::to_string(i) + " has no label");
    y[static_cast<Eigen::Index>(i)] = *points_[i].label;
  }
  return y;
}

std::vector<int> Dataset::class_labels() const {
  if (num_classes_ == 0) throw ArityError("dataset: not a classification dataset");
  std::vector<int> out;
  out.reserve(points_.size());
  for (const auto& p : points_) {
    if (!p.label) throw PreconditionError("dataset: unlabeled point");
    out.push_back(static_cast<int>(*p.label));
  }
  return out;
}

Vector Dataset::feature_mean() const {
  if (points_.empty()) return Vector::Zero(dimension_);
  return feature_matrix().colwise().mean().transpose();
}

Vector Dataset::feature_std() const {
  if (points_.empty()) return Vector::Zero(dimension_);
  const Matrix x = feature_matrix();
  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  return (centered.array().square().colwise().sum() / static_cast<double>(x.rows())).sqrt().transpose();
}

Bounds Dataset::observed_range() const {
  if (points_.empty()) return Bounds::unbounded(dimension_);
  const Matrix x = feature_matrix();
  return Bounds(x.colwise().minCoeff().transpose(), x.colwise().maxCoeff().transpose());
}

Dataset Dataset::with_bounds(std::optional<Bounds> bounds) const {
  return Dataset(points_, feature_names_, encoding_, std::move(bounds), num_classes_);
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  std::vector<DataPoint> pts;
  pts.reserve(indices.size());
  for (auto i : indices) pts.push_back(points_.at(i));
  Dataset out(std::move(pts), feature_names_, encoding_, std::nullopt, num_classes_);
  out.bounds_ = bounds_;
  return out;
}

ParamVector::ParamVector(Vector theta, std::vector<ParamSegment> layout)
    : theta_(std::move(theta)), layout_(std::move(layout)) {
  int total = 0;
  for (const auto& s : layout_) {
    if (s.offset != total || s.length < 0) throw PreconditionError("param layout: segments must be contiguous");
    total += s.length;
  }
  if (total != theta_.size()) {
    throw PreconditionError("param layout: segment lengths sum to " + std::to_string(total) +
                            ", theta has " + std::to_string(theta_.size()));
  }
}

ParamVector ParamVector::with_theta(Vector theta) const { return ParamVector(std::move(theta), layout_); }

Eigen::Map<const Vector> ParamVector::segment(const std::string& name) const {
  for (const auto& s : layout_) {
    if (s.name == name) return Eigen::Map<const Vector>(theta_.data() + s.offset, s.length);
  }
  throw PreconditionError("param layout: no segment named '" + name + "'");
}

Temperature::Temperature(double tau) : tau_(tau) {
  if (!(tau > 0) || !std::isfinite(tau)) throw PreconditionError("temperature must be positive and finite");
}

}  // namespace probekit
