#pragma once

#include <functional>
#include <vector>

#include "probekit/predictor.hpp"
#include "probekit/types.hpp"

namespace probekit {

/// Fraction of points whose predicted class equals the label.
double accuracy(const Predictor& model, const Dataset& data);

/// Area under the ROC curve of `scores` for binary labels (ties count one half).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Column means and sample covariance (divisor n - 1) of row samples.
Vector sample_mean(const Matrix& samples);
Matrix sample_covariance(const Matrix& samples);

/// Per-column standard error of the mean from non-overlapping batch means,
/// which accounts for autocorrelation within a chain.
Vector batch_means_standard_error(const Matrix& samples, int batches = 25);

/// ||a - b||_F / ||b||_F
double relative_frobenius_error(const Matrix& a, const Matrix& b);

/// Total-variation distance between a histogram of `samples` and the density
/// proportional to exp(log_density) on the same uniform grid over [lo, hi].
double total_variation_1d(const std::vector<double>& samples, const std::function<double(double)>& log_density,
                          double lo, double hi, int bins);

/// Central finite-difference gradient.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6);

/// ||a - b|| / max(||b||, floor)
double relative_gradient_error(const Vector& a, const Vector& b, double floor = 1e-4);

}  // namespace probekit
