// Acceptance suite: one PASS/FAIL line per criterion, tolerances fixed below.
// Usage: probekit_acceptance [criterion-number ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <probekit/analytic_lr.hpp>
#include <probekit/datasets.hpp>
#include <probekit/io.hpp>
#include <probekit/latent.hpp>
#include <probekit/linear_models.hpp>
#include <probekit/metrics.hpp>
#include <probekit/mlp.hpp>
#include <probekit/probing.hpp>
#include <probekit/rng.hpp>
#include <probekit/sampler.hpp>
#include <probekit/svm.hpp>
#include <probekit/tree.hpp>

#include "cli_determinism.hpp"
#include "oracles.hpp"

using namespace probekit;

namespace {

// Tolerances.
constexpr double kMeanStandardErrors = 3.0;
constexpr double kCovFrobenius = 0.10;
constexpr double kIdentityRel = 1e-8;
constexpr double kAverageIdentityRel = 1e-10;
constexpr double kGradientRel = 1e-4;
constexpr double kTvMax = 0.05;
constexpr double kDetailedBalanceAbs = 1e-10;
constexpr int kBatches = 50;  // batch-means standard errors
constexpr std::uint64_t kSuiteSeed = 20240601;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

Vector row(const Matrix& m, Eigen::Index i) { return m.row(i).transpose(); }

// ---------------------------------------------------------------------------
// 1. Closed-form data posterior vs MALA.

Dataset lr_synthetic(int n, int d, std::uint64_t seed, double noise = 0.5) {
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector beta(d);
  for (int j = 0; j < d; ++j) beta[j] = n01(rng);
  Matrix x(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = n01(rng);
    y[i] = x.row(i).dot(beta) + 0.3 + noise * n01(rng);
  }
  return Dataset::from_matrix(x, y);
}

void ac1(Outcome& out) {
  const double tau = 0.5;
  const Dataset data = lr_synthetic(2000, 4, 11);
  const Matrix x = data.feature_matrix();
  const Vector y = data.label_vector();
  const oracle::Ols fit = oracle::normal_equations(x, y);
  double mean_yhat = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) mean_yhat += x.row(i).dot(fit.xi) + fit.b;
  mean_yhat /= static_cast<double>(x.rows());
  const double w = mean_yhat + 2.0;
  const oracle::LrGaussian truth = oracle::lr_gaussian(x, y, w, tau);

  const ProbeFunction g = lr_data_energy(data, w, tau);
  ChainConfig cfg;
  cfg.tau = Temperature(tau);
  cfg.step_size = 0.15;
  cfg.n_steps = 250000;
  cfg.burn_in = 10000;
  cfg.seed = 2024;
  const ProbeReport rep = run_chain(data.feature_mean(), g, cfg);

  const Vector se = batch_means_standard_error(rep.samples, kBatches);
  const Vector z = (rep.mean - truth.mean).cwiseQuotient(se);
  const double cov_err = relative_frobenius_error(sample_covariance(rep.samples), truth.cov);
  out.detail << "max |mean err|/SE = " << z.cwiseAbs().maxCoeff() << ", cov rel Frobenius = " << cov_err
             << ", acceptance = " << rep.acceptance_rate;
  out.check(z.cwiseAbs().maxCoeff() <= kMeanStandardErrors, "mean within 3 SE");
  out.check(cov_err <= kCovFrobenius, "covariance within 10% Frobenius");
}

// ---------------------------------------------------------------------------
// 2. Statistical identities on random regression sets.

void ac2(Outcome& out) {
  Rng rng(99);
  std::uniform_int_distribution<int> dim(1, 8);
  std::uniform_int_distribution<int> size(30, 400);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst_cov = 0.0;
  double worst_var = 0.0;
  double worst_avg = 0.0;
  double worst_mean = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int d = dim(rng);
    const int n = std::max(size(rng), 2 * d + 5);
    Matrix mix(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) mix(i, j) = n01(rng);
    Vector shift(d);
    for (int j = 0; j < d; ++j) shift[j] = 3.0 * unif(rng);
    Matrix x(n, d);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      Vector u(d);
      for (int j = 0; j < d; ++j) u[j] = n01(rng);
      x.row(i) = (mix * u + shift).transpose();
      y[i] = unif(rng) * x.row(i).sum() + n01(rng);
    }
    const double tau = std::exp(unif(rng));
    const Dataset data = Dataset::from_matrix(x, y);
    const LrSummary s = lr_summary(data);
    const Vector a_tau_xi = s.a * s.xi_hat / tau;
    worst_cov = std::max(worst_cov, (a_tau_xi - s.cov_xy / tau).norm() / (s.cov_xy / tau).norm());
    worst_var = std::max(worst_var, std::abs(s.xi_hat.dot(s.a * s.xi_hat) / tau - s.var_yhat / tau) / (s.var_yhat / tau));
    worst_avg = std::max(worst_avg, std::abs(s.xi_hat.dot(s.xbar) + s.b_hat - s.mean_yhat) / std::max(1.0, std::abs(s.mean_yhat)));

    const double w = s.mean_yhat + unif(rng);
    const GaussianPosterior post = lr_data_posterior(data, w, tau);
    const oracle::LrGaussian truth = oracle::lr_gaussian(x, y, w, tau);
    worst_mean = std::max(worst_mean, (post.mean - truth.mean).norm() / std::max(1.0, truth.mean.norm()));
  }
  out.detail << "worst rel: A xi = Cov " << worst_cov << ", xi'A xi = Var " << worst_var << ", average " << worst_avg
             << ", f_hat vs oracle " << worst_mean;
  out.check(worst_cov <= kIdentityRel, "A_tau xi = Cov/tau");
  out.check(worst_var <= kIdentityRel, "xi' A_tau xi = Var/tau");
  out.check(worst_avg <= kAverageIdentityRel, "prediction of the average");
  out.check(worst_mean <= kIdentityRel, "closed-form mean matches oracle");
}

// ---------------------------------------------------------------------------
// 3. Concentric circles: contrast, risky and counterfactual probes.

struct Circles {
  Dataset data = concentric_circles(100, 1.0, 2.0, 0.1, 7);
  PredictorPtr rbf;
  PredictorPtr poly;
  Circles() {
    SvmOptions o;
    o.kernel = Kernel::rbf(5.0);
    o.C = 1.0;
    rbf = fit_kernel_svm(data, o);
    o.kernel = Kernel::polynomial(3, 1.0);
    poly = fit_kernel_svm(data, o);
  }
};

void ac3(Outcome& out) {
  const Circles c;
  const Bounds box = c.data.observed_range();

  // (a) contrast
  {
    ChainConfig cfg;
    cfg.tau = Temperature(0.02);
    cfg.step_size = 0.01;
    cfg.n_steps = 12000;
    cfg.thinning = 10;
    cfg.seed = 31;
    cfg.bounds = box;
    // No regularizer: chains start at the dataset mean.
    const std::vector<Vector> starts(4, c.data.feature_mean());
    const ProbeReport rep = run_chains(starts, contrast_g(c.rbf, c.poly), cfg);
    double radius = 0.0;
    std::size_t disagree = 0;
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
      const Vector s = row(rep.samples, i);
      radius += s.norm();
      disagree += c.rbf->predict(s) != c.poly->predict(s);
    }
    radius /= static_cast<double>(rep.samples.rows());
    const double rate = static_cast<double>(disagree) / static_cast<double>(rep.samples.rows());
    out.detail << "(a) disagreement " << rate << ", mean radius " << radius;
    out.check(rate >= 0.95, "(a) disagreement >= 0.95");
    out.check(radius < 1.0, "(a) mean radius < inner radius");
  }

  // (b), (c) risky
  for (const auto& [label, model] : {std::pair{"(b) rbf", c.rbf}, std::pair{"(c) poly", c.poly}}) {
    ChainConfig cfg;
    cfg.tau = Temperature(0.002);
    cfg.step_size = 0.005;
    cfg.n_steps = 20000;
    cfg.thinning = 10;
    cfg.seed = 32;
    cfg.bounds = box;
    RiskyOptions opt;
    opt.alpha = 0.0;
    opt.r = 2.0;
    opt.output = GradientTarget::decision();
    // No regularizer: chains start at the dataset mean.
    const std::vector<Vector> starts(4, c.data.feature_mean());
    const ProbeReport rep = run_chains(starts, risky_g(model, opt), cfg);
    double mean_abs = 0.0;
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) mean_abs += std::abs(model->decision_value(row(rep.samples, i)));
    mean_abs /= static_cast<double>(rep.samples.rows());
    out.detail << "; " << label << " mean |f| " << mean_abs;
    out.check(mean_abs <= 0.1, std::string(label) + " mean |decision| <= 0.1");
  }

  // (d) counterfactual around a class-0 anchor
  {
    const Vector anchor = c.data[0].features;
    const int anchor_label = static_cast<int>(c.rbf->predict(anchor));
    double nearest = INFINITY;
    for (const auto& p : c.data.points()) {
      if (static_cast<int>(*p.label) != anchor_label) nearest = std::min(nearest, (p.features - anchor).norm());
    }
    ChainConfig cfg;
    cfg.tau = Temperature(0.01);
    cfg.step_size = 0.005;
    cfg.n_steps = 20000;
    cfg.thinning = 10;
    cfg.seed = 33;
    cfg.bounds = box;
    const ProbeFunction g = fixed_label_g(c.rbf, 1 - anchor_label, Regularizer(anchor, 0.02));
    const ProbeReport rep = run_chain(anchor, g, cfg);
    std::size_t flipped = 0;
    double dist = 0.0;
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
      const Vector s = row(rep.samples, i);
      flipped += static_cast<int>(c.rbf->predict(s)) != anchor_label;
      dist += (s - anchor).norm();
    }
    dist /= static_cast<double>(rep.samples.rows());
    const double rate = static_cast<double>(flipped) / static_cast<double>(rep.samples.rows());
    out.detail << "; (d) opposite label " << rate << ", mean distance " << dist << " vs nearest opposite " << nearest;
    out.check(rate >= 0.99, "(d) >= 99% opposite label");
    out.check(dist < 1.5 * nearest, "(d) mean distance < 1.5 x nearest opposite point");
  }
}

// ---------------------------------------------------------------------------
// 4. Counterfactual flips on the credit stand-in.

void ac4(Outcome& out) {
  const Dataset data = synthetic_credit(4000, 1);
  const auto model = fit_logistic_regression(data);
  const Bounds range = data.observed_range();
  const int d = data.dimension();
  // Clamped features: credit history length, recent inquiries (may only fall),
  // debt to income (observed range).
  const int kHistory = 1;
  const int kInquiries = 6;
  const int kDti = 7;

  std::vector<Vector> anchors;
  for (const auto& p : data.points()) {
    if (*p.label == 0.0 && model->predict(p.features) == 0.0) anchors.push_back(p.features);
    if (anchors.size() == 50) break;
  }
  std::size_t total = 0;
  std::size_t flipped = 0;
  std::size_t violations = 0;
  for (std::size_t r = 0; r < anchors.size(); ++r) {
    const Vector& a = anchors[r];
    Vector lo = Vector::Constant(d, -INFINITY);
    Vector hi = Vector::Constant(d, INFINITY);
    lo[kHistory] = a[kHistory] - 0.25;
    hi[kHistory] = a[kHistory] + 0.25;
    lo[kInquiries] = range.lo[kInquiries];
    hi[kInquiries] = a[kInquiries];
    lo[kDti] = range.lo[kDti];
    hi[kDti] = range.hi[kDti];
    ChainConfig cfg;
    cfg.tau = Temperature(0.02);
    cfg.step_size = 0.01;
    cfg.n_steps = 4000;
    cfg.burn_in = 1000;
    cfg.thinning = 15;
    cfg.seed = 4000 + r;
    cfg.bounds = Bounds(lo, hi);
    const ProbeReport rep = run_chain(a, fixed_label_g(model, 1.0, Regularizer(a, 0.02)), cfg);
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
      const Vector s = row(rep.samples, i);
      ++total;
      flipped += model->predict(s) == 1.0;
      violations += !cfg.bounds->contains(s);
    }
  }
  const double rate = total ? static_cast<double>(flipped) / static_cast<double>(total) : 0.0;
  out.detail << anchors.size() << " runs, " << total << " samples, flip rate " << rate << ", bound violations "
             << violations;
  out.check(anchors.size() == 50, "50 runs");
  out.check(total > 0 && flipped == total, "flip rate = 100%");
  out.check(violations == 0, "bounded features respected");
}

// ---------------------------------------------------------------------------
// 5. Risky samples of an MLP concentrate on the 0.5 probability level.

void ac5(Outcome& out) {
  const Dataset data = synthetic_credit(4000, 2);
  MlpTrainOptions opt;
  opt.steps = 3000;
  opt.seed = 5;
  const auto mlp = fit_mlp(data, MlpSpec{{32, 32, 2}, 0.0}, opt);
  RiskyOptions risky;
  risky.alpha = 0.5;
  risky.r = 2.0;
  risky.output = GradientTarget::probability(1);
  ChainConfig cfg;
  cfg.tau = Temperature(0.001);
  cfg.step_size = 0.05;
  cfg.n_steps = 20625;
  cfg.burn_in = 625;
  cfg.thinning = 40;
  cfg.seed = 55;
  cfg.bounds = data.observed_range();
  const ProbeReport rep = run_chain(data.feature_mean(), risky_g(mlp, risky), cfg);
  std::vector<double> probs;
  for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) probs.push_back(mlp->predict_proba(row(rep.samples, i))[1]);
  double mean = 0.0;
  for (double p : probs) mean += p;
  mean /= static_cast<double>(probs.size());
  double var = 0.0;
  for (double p : probs) var += (p - mean) * (p - mean);
  const double sd = std::sqrt(var / static_cast<double>(probs.size() - 1));
  out.detail << probs.size() << " samples, mean p = " << mean << ", sd = " << sd << ", acceptance "
             << rep.acceptance_rate;
  out.check(probs.size() == 500, "500 samples");
  out.check(mean >= 0.45 && mean <= 0.60, "mean in [0.45, 0.60]");
  out.check(sd <= 0.05, "sd <= 0.05");
}

// ---------------------------------------------------------------------------
// 6. Wine pin: DT certain of class 1, RF near uniform.

void ac6(Outcome& out) {
  // PROBEKIT_WINE_CSV points at a headered wine CSV with a `label` column (classes 0, 1, 2).
  const char* csv = std::getenv("PROBEKIT_WINE_CSV");
  const Dataset data = csv != nullptr ? read_numeric_dataset(csv, true) : synthetic_wine(29);
  const auto& names = data.feature_names();
  const auto color_it = std::find(names.begin(), names.end(), "color_intensity");
  const int color = color_it != names.end() ? static_cast<int>(color_it - names.begin()) : 9;

  const auto dt = fit_tree(data, TreeOptions{32, 2, 0, 1});
  ForestOptions fo;
  fo.n_trees = 100;
  fo.seed = 2;
  const auto rf = fit_forest(data, fo);

  const Vector center = data.feature_mean();
  const Vector scale = data.feature_std();
  auto phi = std::make_shared<const LatentMap>(LatentMap::standardizing(center, scale));
  ProbeFunction g({{1.0, std::make_shared<NegativeEntropyTerm>(rf)}});
  g = g.with_term(certainty_pin_g(dt, 1, 5.0));
  const ProbeFunction h = pushforward_probe(g, phi);

  ChainConfig cfg;
  cfg.tau = Temperature(0.02);
  cfg.step_size = 0.06;
  cfg.n_steps = 40000;
  cfg.burn_in = 30000;
  cfg.thinning = 2000;
  cfg.seed = derive_seed(kSuiteSeed, 6);
  cfg.gradient_mode = GradientMode::Smoothed;
  cfg.smoothing.sigma = 0.2;
  cfg.smoothing.samples = 8;
  cfg.smoothing.reuse_drift_in_reverse = false;
  cfg.bounds = standardize_bounds(data.observed_range(), center, scale);

  std::vector<Vector> starts;
  for (const auto& p : data.points()) {
    if (*p.label == 1.0 && dt->predict_proba(p.features)[1] == 1.0) starts.push_back((p.features - center).cwiseQuotient(scale));
    if (starts.size() == 10) break;
  }
  const ProbeReport z = run_chains(starts, h, cfg);
  const ProbeReport rep = push_samples(z, *phi, names);

  bool dt_certain = true;
  bool color_path = true;
  int within = 0;
  double worst_max = 0.0;
  Vector rf_mean = Vector::Zero(3);
  for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
    const Vector s = row(rep.samples, i);
    dt_certain &= dt->predict_proba(s)[1] == 1.0;
    const Vector q = rf->predict_proba(s);
    rf_mean += q;
    within += ((q.array() - 1.0 / 3.0).abs() <= 0.15).all() ? 1 : 0;
    worst_max = std::max(worst_max, q.maxCoeff());
    bool seen = false;
    for (int node : dt->decision_path(s)) seen |= dt->nodes()[node].feature == color;
    color_path &= seen;
  }
  rf_mean /= static_cast<double>(std::max<Eigen::Index>(rep.samples.rows(), 1));
  out.detail << rep.samples.rows() << " samples, RF mean proba (" << rf_mean[0] << ", " << rf_mean[1] << ", "
             << rf_mean[2] << "), " << within << " samples individually within 1/3 +- 0.15, max RF proba "
             << worst_max << ", acceptance " << z.acceptance_rate;
  out.check(rep.samples.rows() == 50, "50 samples");
  out.check(dt_certain, "DT class-1 probability = 1");
  out.check(((rf_mean.array() - 1.0 / 3.0).abs() <= 0.15).all(), "RF mean probabilities within 1/3 +- 0.15");
  out.check(color_path, "DT path passes a color-intensity split");
}

// ---------------------------------------------------------------------------
// 7. Sampler properties.

std::shared_ptr<QuadraticTerm> gaussian_energy(const Matrix& precision, const Vector& mu) {
  // 0.5 (x - mu)' P (x - mu)
  return std::make_shared<QuadraticTerm>(0.5 * precision, -(precision * mu), 0.5 * mu.dot(precision * mu));
}

void ac7(Outcome& out) {
  // Gaussian targets, dimensions 1..10.
  double worst_z = 0.0;
  double worst_cov = 0.0;
  Rng rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int d = 1; d <= 10; ++d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = n01(rng);
    Eigen::HouseholderQR<Matrix> qr(m);
    const Matrix q = qr.householderQ();
    Vector eig(d);
    for (int i = 0; i < d; ++i) eig[i] = 1.0 + 2.0 * i / std::max(1, d - 1);
    const Matrix precision = q * eig.asDiagonal() * q.transpose();
    Vector mu(d);
    for (int i = 0; i < d; ++i) mu[i] = n01(rng);
    ChainConfig cfg;
    cfg.tau = Temperature(1.0);
    cfg.step_size = 0.25;
    cfg.n_steps = 200000;
    cfg.seed = derive_seed(kSuiteSeed, static_cast<std::uint64_t>(d));
    const ProbeReport rep = run_chain(Vector::Zero(d), ProbeFunction({{1.0, gaussian_energy(precision, mu)}}), cfg);
    const Vector se = batch_means_standard_error(rep.samples, kBatches);
    worst_z = std::max(worst_z, (rep.mean - mu).cwiseQuotient(se).cwiseAbs().maxCoeff());
    worst_cov = std::max(worst_cov, relative_frobenius_error(sample_covariance(rep.samples), oracle::invert(precision)));
  }
  out.detail << "gaussian: max |z| " << worst_z << ", max cov err " << worst_cov;
  out.check(worst_z <= kMeanStandardErrors, "gaussian means within 3 SE");
  out.check(worst_cov <= kCovFrobenius, "gaussian covariance within 10%");

  // Double well against quadrature.
  {
    const double tau = 0.3;
    auto well = std::make_shared<FunctionTerm>(
        [](const Vector& x) { return std::pow(x[0] * x[0] - 1.0, 2); },
        [](const Vector& x) { return Vector::Constant(1, 4.0 * x[0] * (x[0] * x[0] - 1.0)); }, "double-well", 1);
    ChainConfig cfg;
    cfg.tau = Temperature(tau);
    cfg.step_size = 0.1;
    cfg.n_steps = 50000;
    cfg.seed = 71;
    const ProbeReport rep = run_chain(Vector::Zero(1), ProbeFunction({{1.0, well}}), cfg);
    const double lo = -2.5;
    const double hi = 2.5;
    const int bins = 50;
    const auto ref = oracle::grid_masses([&](double x) { return -std::pow(x * x - 1.0, 2) / tau; }, lo, hi, bins);
    std::vector<double> hist(bins, 0.0);
    double outside = 0.0;
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) {
      const double s = rep.samples(i, 0);
      if (s < lo || s >= hi) {
        outside += 1.0;
        continue;
      }
      hist[static_cast<int>((s - lo) / (hi - lo) * bins)] += 1.0;
    }
    double tv = outside / static_cast<double>(rep.samples.rows());
    for (int b = 0; b < bins; ++b) tv += std::abs(hist[b] / static_cast<double>(rep.samples.rows()) - ref[b]);
    tv *= 0.5;
    out.detail << "; double-well TV " << tv;
    out.check(tv <= kTvMax, "double-well TV <= 0.05");
  }

  // Temperature ordering.
  {
    auto bowl = std::make_shared<FunctionTerm>(
        [](const Vector& x) { return x.squaredNorm() + 0.5 * std::pow(x.squaredNorm(), 2); },
        [](const Vector& x) { return Vector(2.0 * x + 2.0 * x.squaredNorm() * x); }, "bowl", 2);
    std::vector<double> vars;
    for (double tau : {0.01, 0.1, 1.0}) {
      ChainConfig cfg;
      cfg.tau = Temperature(tau);
      cfg.step_size = 0.05;
      cfg.n_steps = 20000;
      cfg.seed = 72;
      const ProbeReport rep = run_chain(Vector::Zero(2), ProbeFunction({{1.0, bowl}}), cfg);
      vars.push_back(sample_covariance(rep.samples).trace());
    }
    out.detail << "; variances " << vars[0] << " < " << vars[1] << " < " << vars[2];
    out.check(vars[0] <= vars[1] && vars[1] <= vars[2], "variance nondecreasing in tau");
  }

  // Detailed balance in log space, including |G| ~ 1e6.
  {
    double worst = 0.0;
    Rng r2(73);
    std::normal_distribution<double> n(0.0, 1.0);
    const double eta = 0.05;
    for (int t = 0; t < 200; ++t) {
      const double tau = std::exp(n(r2));
      const double offset = t % 2 == 0 ? 0.0 : 1e6;
      auto energy = [&](const Vector& x) { return offset + std::pow(x.squaredNorm(), 2) / 4.0 + x[0] * x[1] + 3.0 * x[2]; };
      auto grad = [&](const Vector& x) {
        Vector g = x.squaredNorm() * x;
        g[0] += x[1];
        g[1] += x[0];
        g[2] += 3.0;
        return g;
      };
      Vector x(3);
      Vector y(3);
      for (int i = 0; i < 3; ++i) {
        x[i] = n(r2);
        y[i] = x[i] + 0.3 * n(r2);
      }
      const double gx = energy(x);
      const double gy = energy(y);
      const double fwd = std::min(0.0, log_acceptance_ratio(x, gx, grad(x), y, gy, grad(y), eta, tau));
      const double bwd = std::min(0.0, log_acceptance_ratio(y, gy, grad(y), x, gx, grad(x), eta, tau));
      // log alpha(x->y) + log pi(x) + log q(y|x) = log alpha(y->x) + log pi(y) + log q(x|y)
      const double lhs = fwd - (gx - offset) / tau + log_transition_density(y, x, grad(x), eta, tau);
      const double rhs = bwd - (gy - offset) / tau + log_transition_density(x, y, grad(y), eta, tau);
      if (!std::isfinite(lhs) || !std::isfinite(rhs)) worst = INFINITY;
      worst = std::max(worst, std::abs(lhs - rhs));
    }
    out.detail << "; detailed balance max gap " << worst;
    out.check(worst <= kDetailedBalanceAbs, "detailed balance within 1e-10");
  }

  // Clipped chains stay in bounds.
  {
    const Bounds box(Vector::Constant(3, -0.3), Vector::Constant(3, 0.5));
    ChainConfig cfg;
    cfg.tau = Temperature(1.0);
    cfg.step_size = 0.5;
    cfg.n_steps = 20000;
    cfg.seed = 74;
    cfg.bounds = box;
    const ProbeReport rep =
        run_chain(Vector::Zero(3), ProbeFunction({{1.0, gaussian_energy(Matrix::Identity(3, 3), Vector::Ones(3))}}), cfg);
    std::size_t outside = 0;
    for (Eigen::Index i = 0; i < rep.samples.rows(); ++i) outside += !box.contains(row(rep.samples, i));
    out.detail << "; clipped samples outside " << outside;
    out.check(outside == 0, "clipped chains in bounds");
  }
}

// ---------------------------------------------------------------------------
// 8. Gradient audit.

double audit(const std::function<double(const Vector&)>& f, const std::function<Vector(const Vector&)>& grad, int d,
             double spread, std::uint64_t seed, int points = 100) {
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  double worst = 0.0;
  for (int p = 0; p < points; ++p) {
    Vector x(d);
    for (int i = 0; i < d; ++i) x[i] = spread * n01(rng);
    const Vector an = grad(x);
    // best of two steps; a 1e-5 difference can straddle a ReLU kink
    double err = std::numeric_limits<double>::infinity();
    for (double h : {1e-5, 1e-7}) {
      const Vector fd = oracle::gradient_fd(f, x, h);
      err = std::min(err, (an - fd).norm() / std::max(fd.norm(), 1e-4));
    }
    worst = std::max(worst, err);
  }
  return worst;
}

void ac8(Outcome& out) {
  const Dataset circles = concentric_circles(60, 1.0, 2.0, 0.1, 3);
  const Dataset credit = synthetic_credit(600, 8);
  const Dataset housing = synthetic_housing(300, 9);
  const Dataset blobs = gaussian_blobs(40, (Matrix(3, 2) << 0, 0, 2, 0, 0, 2).finished(), 0.8, 10);

  std::map<std::string, PredictorPtr> models;
  models["linear"] = fit_linear_regression(housing);
  models["logistic"] = fit_logistic_regression(credit);
  MlpTrainOptions mo;
  mo.steps = 400;
  mo.seed = 1;
  models["mlp-binary"] = fit_mlp(credit, MlpSpec{{16, 16, 2}, 0.0}, mo);
  models["mlp-3class"] = fit_mlp(blobs, MlpSpec{{12, 3}, 0.0}, mo);
  models["mlp-regressor"] = fit_mlp(housing, MlpSpec{{16, 1}, 0.0}, mo);
  SvmOptions so;
  so.kernel = Kernel::rbf(1.0);
  models["svm-rbf"] = fit_kernel_svm(circles, so);
  so.kernel = Kernel::polynomial(3, 1.0);
  models["svm-poly"] = fit_kernel_svm(circles, so);
  so.kernel = Kernel::rbf(0.3);
  so.regression = true;
  models["svr"] = fit_kernel_svm(housing, so);

  double worst = 0.0;
  std::string worst_name;
  auto record = [&](const std::string& name, double e) {
    if (e > worst) {
      worst = e;
      worst_name = name;
    }
  };
  std::uint64_t seed = 800;
  for (const auto& [name, m] : models) {
    const int d = m->input_dim();
    std::vector<GradientTarget> targets;
    if (!m->is_classifier() || m->num_classes() == 2) targets.push_back(GradientTarget::decision());
    for (int k = 0; k < m->num_classes(); ++k) {
      targets.push_back(GradientTarget::probability(k));
      targets.push_back(GradientTarget::logit(k));
    }
    for (const auto& t : targets) {
      auto f = [&](const Vector& x) {
        switch (t.kind) {
          case GradientTarget::Kind::Decision: return m->decision_value(x);
          case GradientTarget::Kind::Probability: return m->predict_proba(x)[t.index];
          case GradientTarget::Kind::Logit: return m->raw_output(x)[t.index];
        }
        return 0.0;
      };
      record(name, audit(f, [&](const Vector& x) { return m->input_gradient(x, t); }, d, 1.0, seed++));
    }
  }

  // Probe functions.
  std::map<std::string, ProbeFunction> probes;
  const auto& logi = models["logistic"];
  const auto& mlp2 = models["mlp-binary"];
  const Vector a8 = credit.feature_mean();
  probes["fixed-label"] = fixed_label_g(mlp2, 1.0, Regularizer(a8, 0.1));
  probes["fixed-label-regression"] = fixed_label_g(models["mlp-regressor"], 2.5, Regularizer(Vector::Zero(6), 0.1, 1.5));
  const ParamEnsemble ens = draw_param_ensemble(*mlp2, 0.05, 8, 3);
  probes["ensemble-fixed-label"] = ensemble_fixed_label_g(ens, *mlp2, 0.0);
  probes["contrast"] = contrast_g(logi, mlp2, Regularizer(a8, 0.05, 3.0));
  probes["contrast-svm"] = contrast_g(models["svm-rbf"], models["svm-poly"]);
  probes["regression-contrast"] = regression_contrast_g(models["svr"], models["linear"], 1.0);
  probes["risky-decision"] = risky_g(models["svm-poly"], RiskyOptions{RiskyMode::Norm, 0.0, 2.0, GradientTarget::decision()});
  probes["risky-probability"] = risky_g(mlp2, RiskyOptions{RiskyMode::Norm, 0.5, 3.0, GradientTarget::probability(1)});
  probes["risky-entropy"] = risky_g(models["mlp-3class"], RiskyOptions{RiskyMode::Entropy});
  probes["param-sensitive"] = param_sensitive_g(ens, mlp2, Regularizer(a8, 0.01));
  probes["regression-sensitive"] =
      regression_sensitive_g(draw_param_ensemble(*models["mlp-regressor"], 0.05, 8, 4), models["mlp-regressor"], 0.5);
  probes["certainty-pin"] = ProbeFunction({certainty_pin_g(models["mlp-3class"], 2, 2.0)});
  probes["lr-data-energy"] = lr_data_energy(housing, 3.0, 0.5);
  {
    Matrix w1(6, 3);
    Rng r(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = n(r);
    const LatentMap phi({{w1, Vector::Constant(6, 0.1), Activation::Tanh},
                         {Matrix::Identity(6, 6) * 2.0, Vector::Zero(6), Activation::Identity}});
    probes["pushforward"] = pushforward_probe(fixed_label_g(models["mlp-regressor"], 1.0), std::make_shared<LatentMap>(phi));
  }
  for (const auto& [name, g] : probes) {
    const int d = g.input_dim();
    record(name, audit([&](const Vector& x) { return g.evaluate(x); }, [&](const Vector& x) { return g.gradient(x); },
                       d, 1.0, seed++));
  }
  out.detail << models.size() << " predictors, " << probes.size() << " probe functions, 100 points each; worst rel err "
             << worst << " (" << worst_name << ")";
  out.check(worst <= kGradientRel, "finite-difference agreement within 1e-4");
}

// ---------------------------------------------------------------------------
// 9. Smoothed gradients.

void ac9(Outcome& out) {
  auto step = std::make_shared<FunctionTerm>([](const Vector& x) { return x[0] > 0.0 ? 1.0 : 0.0; },
                                             FunctionTerm::GradientFn{}, "step", 1);
  const ProbeFunction g({{1.0, step}});
  Rng rng(91);
  int positive = 0;
  for (int t = 0; t < 100; ++t) positive += smoothed_gradient(g, Vector::Constant(1, -0.1), 0.5, 64, rng)[0] > 0.0;
  out.detail << "step direction correct " << positive << "/100";
  out.check(positive >= 95, ">= 95% correct sign");

  // Smoothed vs exact on a differentiable, non-Gaussian target.
  auto energy = std::make_shared<FunctionTerm>(
      [](const Vector& x) { return 0.5 * x.squaredNorm() + 0.25 * std::pow(x[0] - 0.5, 4) + 0.3 * x[0] * x[1]; },
      [](const Vector& x) {
        Vector gr = x;
        gr[0] += std::pow(x[0] - 0.5, 3) + 0.3 * x[1];
        gr[1] += 0.3 * x[0];
        return gr;
      },
      "smooth", 2);
  const ProbeFunction smooth({{1.0, energy}});
  ChainConfig cfg;
  cfg.tau = Temperature(0.5);
  cfg.step_size = 0.2;
  cfg.n_steps = 60000;
  cfg.seed = 92;
  const ProbeReport exact = run_chain(Vector::Zero(2), smooth, cfg);
  cfg.gradient_mode = GradientMode::Smoothed;
  cfg.smoothing.sigma = 0.1;
  cfg.smoothing.samples = 8;
  cfg.smoothing.inverse_sigma_scaling = true;
  cfg.seed = 93;
  const ProbeReport smoothed = run_chain(Vector::Zero(2), smooth, cfg);
  const Vector se = (batch_means_standard_error(exact.samples, kBatches).array().square() +
                     batch_means_standard_error(smoothed.samples, kBatches).array().square())
                        .sqrt();
  const double z = (exact.mean - smoothed.mean).cwiseQuotient(se).cwiseAbs().maxCoeff();
  out.detail << "; exact vs smoothed means max |diff|/SE " << z;
  out.check(z <= kMeanStandardErrors, "smoothed and exact means within 3 SE");
}

// ---------------------------------------------------------------------------
// 10. CLI determinism.

void ac10(Outcome& out) { cli_determinism(out.pass, out.detail); }

struct Criterion {
  int id;
  const char* title;
  double limit_seconds;
  void (*run)(Outcome&);
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "analytic posterior vs MALA", 30, ac1},
      {2, "regression identities", 5, ac2},
      {3, "concentric-circles probes", 60, ac3},
      {4, "counterfactual flips", 60, ac4},
      {5, "risky-sample concentration", 120, ac5},
      {6, "wine pin probe", 60, ac6},
      {7, "sampler properties", 120, ac7},
      {8, "gradient audit", 30, ac8},
      {9, "smoothed gradients", 60, ac9},
      {10, "cli determinism", 30, ac10},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome out;
    const auto start = Clock::now();
    try {
      c.run(out);
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    if (!in_time) out.detail << " [over time limit]";
    const bool pass = out.pass && in_time;
    failures += !pass;
    std::printf("AC%-2d %s  %-28s %6.1fs / %3.0fs  %s\n", c.id, pass ? "PASS" : "FAIL", c.title, secs, c.limit_seconds,
                out.detail.str().c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
