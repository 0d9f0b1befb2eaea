#include <doctest.h>

#include <cmath>

#include <probekit/datasets.hpp>
#include <probekit/errors.hpp>
#include <probekit/linear_models.hpp>
#include <probekit/metrics.hpp>
#include <probekit/mlp.hpp>

using namespace probekit;

TEST_CASE("noise-free circles lie exactly on their radii") {
  const Dataset d = concentric_circles(50, 1.0, 2.0, 0.0, 3);
  REQUIRE(d.size() == 100);
  for (const auto& p : d.points()) {
    const double r = *p.label == 0.0 ? 1.0 : 2.0;
    CHECK(std::abs(p.features.norm() - r) < 1e-12);
  }
  CHECK_THROWS(concentric_circles(10, 2.0, 1.0));
  CHECK_THROWS(concentric_circles(10, -1.0, 1.0));
}

TEST_CASE("generators are deterministic in their seed") {
  CHECK(concentric_circles(30, 1, 2, 0.1, 5).feature_matrix() == concentric_circles(30, 1, 2, 0.1, 5).feature_matrix());
  CHECK(synthetic_credit(50, 1).feature_matrix() != synthetic_credit(50, 2).feature_matrix());
  CHECK(synthetic_wine(4).feature_matrix() == synthetic_wine(4).feature_matrix());
}

TEST_CASE("synthetic credit carries signal") {
  const Dataset d = synthetic_credit(5000, 1);
  CHECK(d.dimension() == 8);
  const auto m = fit_logistic_regression(d);
  std::vector<double> scores;
  for (const auto& p : d.points()) scores.push_back(m->decision_value(p.features));
  CHECK(roc_auc(scores, d.class_labels()) >= 0.75);
}

TEST_CASE("blobs with identical centres carry no signal") {
  const Matrix centers = Matrix::Zero(2, 2);
  const auto m = fit_logistic_regression(gaussian_blobs(500, centers, 1.0, 1));
  const double acc = accuracy(*m, gaussian_blobs(1000, centers, 1.0, 2));
  CHECK(acc == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("xor defeats linear models but not an mlp") {
  const Dataset d = xor_dataset(400, 3);
  CHECK(accuracy(*fit_logistic_regression(d), d) <= 0.6);
  MlpTrainOptions o;
  o.steps = 3000;
  o.seed = 2;
  o.schedule.initial = 0.01;
  o.schedule.decay_steps = 1000;
  CHECK(accuracy(*fit_mlp(d, MlpSpec{{16, 16, 2}}, o), d) >= 0.95);
}

TEST_CASE("wine and housing shapes") {
  const Dataset w = synthetic_wine(1);
  CHECK(w.size() == 178);
  CHECK(w.dimension() == 13);
  CHECK(w.num_classes() == 3);
  const Dataset h = synthetic_housing(300, 1);
  CHECK(h.dimension() == 6);
  CHECK(h.num_classes() == 0);
}

TEST_CASE("datasets by name") {
  const auto names = dataset_generators();
  CHECK(std::find(names.begin(), names.end(), "credit") != names.end());
  const Dataset d = make_dataset("linear", {{"n", 50}, {"d", 3}}, 1);
  CHECK(d.size() == 50);
  CHECK(d.dimension() == 3);
  CHECK(make_dataset("circles", {{"n_per_class", 10}}, 7).feature_matrix() == concentric_circles(10).feature_matrix());
  CHECK_THROWS_AS(make_dataset("mnist", nlohmann::json::object(), 1), SpecError);
  CHECK_THROWS_AS(make_dataset("xor", {{"rows", 10}}, 1), SpecError);
}
