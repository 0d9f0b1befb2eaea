#include "probekit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "probekit/errors.hpp"

namespace probekit {

double accuracy(const Predictor& model, const Dataset& data) {
  if (data.empty()) throw PreconditionError("accuracy: empty dataset");
  if (!model.is_classifier()) throw ArityError("accuracy: model is a regressor");
  std::size_t hits = 0;
  for (const auto& p : data.points()) {
    if (!p.label) throw PreconditionError("accuracy: unlabelled point");
    if (model.predict(p.features) == *p.label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw PreconditionError("roc_auc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks for ties.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  std::size_t n_pos = 0;
  while (pos < order.size()) {
    std::size_t end = pos;
    while (end < order.size() && scores[order[end]] == scores[order[pos]]) ++end;
    const double avg_rank = 0.5 * static_cast<double>(pos + 1 + end);
    for (std::size_t i = pos; i < end; ++i) {
      if (labels[order[i]] == 1) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    pos = end;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw PreconditionError("roc_auc: needs both classes");
  const double np = static_cast<double>(n_pos);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

Vector sample_mean(const Matrix& samples) {
  if (samples.rows() == 0) throw PreconditionError("sample_mean: no samples");
  return samples.colwise().mean().transpose();
}

Matrix sample_covariance(const Matrix& samples) {
  if (samples.rows() < 2) throw PreconditionError("sample_covariance: need at least two samples");
  const Matrix c = samples.rowwise() - samples.colwise().mean();
  return c.transpose() * c / static_cast<double>(samples.rows() - 1);
}

Vector batch_means_standard_error(const Matrix& samples, int batches) {
  if (batches < 2) throw PreconditionError("batch means: need at least two batches");
  const Eigen::Index size = samples.rows() / batches;
  if (size < 1) throw PreconditionError("batch means: fewer samples than batches");
  Matrix means(batches, samples.cols());
  for (int b = 0; b < batches; ++b) means.row(b) = samples.middleRows(b * size, size).colwise().mean();
  const Matrix c = means.rowwise() - means.colwise().mean();
  const Vector var = c.colwise().squaredNorm().transpose() / static_cast<double>(batches - 1);
  return (var / static_cast<double>(batches)).cwiseSqrt();
}

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  const double nb = b.norm();
  if (nb == 0.0) throw PreconditionError("relative_frobenius_error: reference is zero");
  return (a - b).norm() / nb;
}

double total_variation_1d(const std::vector<double>& samples, const std::function<double(double)>& log_density,
                          double lo, double hi, int bins) {
  if (!(hi > lo) || bins < 1) throw PreconditionError("total_variation_1d: bad grid");
  if (samples.empty()) throw PreconditionError("total_variation_1d: no samples");
  const double width = (hi - lo) / bins;
  std::vector<double> hist(bins, 0.0);
  for (double s : samples) {
    if (s < lo || s >= hi) continue;  // mass outside the grid counts fully toward the distance
    hist[std::min(bins - 1, static_cast<int>((s - lo) / width))] += 1.0;
  }
  // Reference mass per bin by the midpoint rule on a 64x finer grid.
  constexpr int kSub = 64;
  std::vector<double> logs(static_cast<std::size_t>(bins) * kSub);
  for (std::size_t i = 0; i < logs.size(); ++i) logs[i] = log_density(lo + (static_cast<double>(i) + 0.5) * width / kSub);
  const double m = *std::max_element(logs.begin(), logs.end());
  std::vector<double> ref(bins, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    const double v = std::exp(logs[i] - m);
    ref[i / kSub] += v;
    total += v;
  }
  const double n = static_cast<double>(samples.size());
  double tv = 0.0;
  double inside = 0.0;
  for (int b = 0; b < bins; ++b) {
    tv += std::abs(hist[b] / n - ref[b] / total);
    inside += hist[b] / n;
  }
  tv += 1.0 - inside;
  return 0.5 * tv;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + step;
    const double fp = f(xp);
    xp[i] = x[i] - step;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

double relative_gradient_error(const Vector& a, const Vector& b, double floor) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

}  // namespace probekit
