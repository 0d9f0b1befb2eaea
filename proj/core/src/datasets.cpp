#include "probekit/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "probekit/errors.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

std::vector<std::string> numbered(const char* prefix, int d) {
  std::vector<std::string> names;
  for (int i = 0; i < d; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

struct WineFeature {
  const char* name;
  std::array<double, 3> mean;
  std::array<double, 3> sd;
};

// Class-conditional means and standard deviations of the UCI wine data.
constexpr std::array<WineFeature, 13> kWine{{
    {"alcohol", {13.74, 12.28, 13.15}, {0.63, 0.53, 0.52}},
    {"malic_acid", {2.01, 1.93, 3.33}, {0.68, 1.00, 1.08}},
    {"ash", {2.46, 2.45, 2.44}, {0.22, 0.31, 0.18}},
    {"alcalinity_of_ash", {17.04, 20.24, 21.42}, {2.52, 3.33, 2.23}},
    {"magnesium", {106.34, 94.55, 99.31}, {10.41, 16.63, 10.78}},
    {"total_phenols", {2.84, 2.26, 1.68}, {0.34, 0.54, 0.35}},
    {"flavanoids", {2.98, 2.08, 0.78}, {0.39, 0.7, 0.29}},
    {"nonflavanoid_phenols", {0.29, 0.36, 0.45}, {0.07, 0.12, 0.12}},
    {"proanthocyanins", {1.90, 1.63, 1.15}, {0.4, 0.6, 0.4}},
    {"color_intensity", {5.53, 3.09, 7.4}, {1.23, 0.92, 2.3}},
    {"hue", {1.06, 1.06, 0.68}, {0.16, 0.2, 0.11}},
    {"od280_od315", {3.16, 2.78, 1.68}, {0.35, 0.49, 0.27}},
    {"proline", {1115.71, 519.5, 629.9}, {221.64, 156.1, 113.9}},
}};
constexpr std::array<int, 3> kWineCounts{59, 71, 48};

}  // namespace

Dataset concentric_circles(int n_per_class, double r_inner, double r_outer, double noise_sd, std::uint64_t seed) {
  if (n_per_class < 1) throw PreconditionError("concentric_circles: n_per_class must be >= 1");
  if (!(r_inner > 0.0 && r_inner < r_outer)) throw PreconditionError("concentric_circles: need 0 < r_inner < r_outer");
  if (!(noise_sd >= 0.0)) throw PreconditionError("concentric_circles: noise_sd must be >= 0");
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(2 * n_per_class, 2);
  Vector y(2 * n_per_class);
  for (int c = 0; c < 2; ++c) {
    const double r0 = c == 0 ? r_inner : r_outer;
    for (int i = 0; i < n_per_class; ++i) {
      const int row = c * n_per_class + i;
      const double a = angle(rng);
      const double r = r0 + noise_sd * noise(rng);
      x(row, 0) = r * std::cos(a);
      x(row, 1) = r * std::sin(a);
      y[row] = c;
    }
  }
  return Dataset::from_matrix(x, y, numbered("x", 2), 2);
}

Dataset gaussian_blobs(int n_per_class, const Matrix& centers, double sd, std::uint64_t seed) {
  if (n_per_class < 1) throw PreconditionError("gaussian_blobs: n_per_class must be >= 1");
  if (centers.rows() < 2) throw PreconditionError("gaussian_blobs: need at least two centers");
  if (!(sd >= 0.0)) throw PreconditionError("gaussian_blobs: sd must be >= 0");
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const Eigen::Index k = centers.rows();
  const Eigen::Index d = centers.cols();
  Matrix x(k * n_per_class, d);
  Vector y(k * n_per_class);
  for (Eigen::Index c = 0; c < k; ++c) {
    for (int i = 0; i < n_per_class; ++i) {
      const Eigen::Index row = c * n_per_class + i;
      for (Eigen::Index j = 0; j < d; ++j) x(row, j) = centers(c, j) + sd * n01(rng);
      y[row] = static_cast<double>(c);
    }
  }
  return Dataset::from_matrix(x, y, numbered("x", static_cast<int>(d)), static_cast<int>(k));
}

Dataset xor_dataset(int n, std::uint64_t seed) {
  if (n < 4) throw PreconditionError("xor: need at least 4 points");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(n, 2);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y[i] = ((x(i, 0) > 0) != (x(i, 1) > 0)) ? 1.0 : 0.0;
  }
  return Dataset::from_matrix(x, y, numbered("x", 2), 2);
}

Vector synthetic_credit_coefficients() {
  Vector beta(9);
  beta << 1.1, 0.4, 0.6, 0.7, 0.3, -0.8, -0.5, -0.6, 0.2;
  return beta;
}

Dataset synthetic_credit(int n, std::uint64_t seed) {
  if (n < 2) throw PreconditionError("synthetic_credit: need at least 2 rows");
  static const std::vector<std::string> names{
      "external_risk_estimate",     "months_since_oldest_trade", "num_satisfactory_trades",
      "percent_never_delinquent",   "months_since_recent_inquiry", "revolving_utilization",
      "num_recent_inquiries",       "debt_to_income"};
  const int d = static_cast<int>(names.size());
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vector beta = synthetic_credit_coefficients();
  Matrix x(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    // A shared "financial health" factor correlates the features.
    const double health = n01(rng);
    for (int j = 0; j < d; ++j) {
      const double loading = j < 5 ? 0.5 : -0.5;
      x(i, j) = loading * health + std::sqrt(1.0 - loading * loading) * n01(rng);
    }
    const double logit = x.row(i).dot(beta.head(d)) + beta[d];
    y[i] = u(rng) < 1.0 / (1.0 + std::exp(-logit)) ? 1.0 : 0.0;
  }
  return Dataset::from_matrix(x, y, names, 2);
}

Dataset synthetic_wine(std::uint64_t seed, double size_factor) {
  if (!(size_factor > 0.0)) throw PreconditionError("synthetic_wine: size_factor must be > 0");
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::array<int, 3> counts{};
  int total = 0;
  for (int c = 0; c < 3; ++c) {
    counts[c] = std::max(1, static_cast<int>(std::lround(kWineCounts[c] * size_factor)));
    total += counts[c];
  }
  Matrix x(total, static_cast<Eigen::Index>(kWine.size()));
  Vector y(total);
  int row = 0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < counts[c]; ++i, ++row) {
      for (std::size_t j = 0; j < kWine.size(); ++j) {
        // Chemistry measurements are non-negative.
        x(row, static_cast<Eigen::Index>(j)) = std::max(0.0, kWine[j].mean[c] + kWine[j].sd[c] * n01(rng));
      }
      y[row] = c;
    }
  }
  std::vector<std::string> names;
  for (const auto& f : kWine) names.emplace_back(f.name);
  return Dataset::from_matrix(x, y, names, 3);
}

Dataset synthetic_housing(int n, std::uint64_t seed) {
  if (n < 2) throw PreconditionError("synthetic_housing: need at least 2 rows");
  static const std::vector<std::string> names{"median_income", "house_age", "avg_rooms",
                                              "population",    "latitude",  "longitude"};
  Rng rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix x(n, 6);
  Vector y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 6; ++j) x(i, j) = n01(rng);
    y[i] = 2.0 + 0.8 * x(i, 0) + 0.3 * x(i, 2) - 0.1 * x(i, 1) + 0.6 * std::sin(1.5 * x(i, 4)) * std::cos(x(i, 5)) +
           0.25 * x(i, 0) * x(i, 0) - 0.05 * x(i, 3) + 0.1 * n01(rng);
  }
  return Dataset::from_matrix(x, y, names, 0);
}

Dataset linear_gaussian(int n, int d, double noise, std::uint64_t seed) {
  if (n < 2 || d < 1) throw PreconditionError("linear_gaussian: need n >= 2 and d >= 1");
  if (noise < 0) throw PreconditionError("linear_gaussian: noise must be >= 0");
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
  return Dataset::from_matrix(x, y, numbered("x", d), 0);
}

std::vector<std::string> dataset_generators() {
  return {"circles", "blobs", "xor", "credit", "wine", "housing", "linear"};
}

Dataset make_dataset(const std::string& name, const nlohmann::json& params, std::uint64_t seed) {
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
  if (!p.is_object()) throw SpecError("dataset parameters must be an object");
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (const auto& [key, value] : p.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        throw SpecError("generator '" + name + "' has no parameter '" + key + "'");
      }
    }
  };
  if (name == "circles") {
    allow({"n_per_class", "r_inner", "r_outer", "noise"});
    return concentric_circles(p.value("n_per_class", 200), p.value("r_inner", 1.0), p.value("r_outer", 2.0),
                              p.value("noise", 0.1), seed);
  }
  if (name == "blobs") {
    allow({"n_per_class", "centers", "sd"});
    std::vector<std::vector<double>> rows = p.value("centers", std::vector<std::vector<double>>{{-2, 0}, {2, 0}});
    if (rows.empty() || rows.front().empty()) throw SpecError("blobs: centers must be a non-empty matrix");
    Matrix centers(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) throw SpecError("blobs: ragged centers");
      for (std::size_t j = 0; j < rows[i].size(); ++j) {
        centers(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    }
    return gaussian_blobs(p.value("n_per_class", 100), centers, p.value("sd", 1.0), seed);
  }
  if (name == "xor") {
    allow({"n"});
    return xor_dataset(p.value("n", 400), seed);
  }
  if (name == "credit") {
    allow({"n"});
    return synthetic_credit(p.value("n", 5000), seed);
  }
  if (name == "wine") {
    allow({"size_factor"});
    return synthetic_wine(seed, p.value("size_factor", 1.0));
  }
  if (name == "housing") {
    allow({"n"});
    return synthetic_housing(p.value("n", 2000), seed);
  }
  if (name == "linear") {
    allow({"n", "d", "noise"});
    return linear_gaussian(p.value("n", 2000), p.value("d", 4), p.value("noise", 0.5), seed);
  }
  throw SpecError("unknown dataset generator '" + name + "'");
}

}  // namespace probekit
