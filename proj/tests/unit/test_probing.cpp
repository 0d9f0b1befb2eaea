#include <doctest.h>

#include <cmath>

#include <probekit/datasets.hpp>
#include <probekit/errors.hpp>
#include <probekit/linear_models.hpp>
#include <probekit/probing.hpp>
#include <probekit/sampler.hpp>
#include <probekit/tree.hpp>

using namespace probekit;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }

// p1(x) = sigmoid(scale * x)
PredictorPtr logistic_1d(double scale, double bias = 0.0) {
  return std::make_shared<LogisticRegression>(v1(scale), bias, InputScaler::identity(1));
}

PredictorPtr linear_1d(double slope, double intercept) {
  return std::make_shared<LinearRegression>(v1(slope), intercept);
}

double bce(double q, double t) { return -(t * std::log(q) + (1 - t) * std::log(1 - q)); }

// Three-leaf tree over one feature: x <= 0 uniform, 0 < x <= 1 pure class 1, else pure class 2.
PredictorPtr three_leaf_tree() {
  std::vector<TreeNode> nodes(5);
  nodes[0] = {0, 0.0, 1, 2, {}, 3};
  nodes[1] = {-1, 0.0, -1, -1, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1};
  nodes[2] = {0, 1.0, 3, 4, {}, 2};
  nodes[3] = {-1, 0.0, -1, -1, {0, 1, 0}, 1};
  nodes[4] = {-1, 0.0, -1, -1, {0, 0, 1}, 1};
  return std::make_shared<DecisionTree>(nodes, 1, 3);
}

}  // namespace

TEST_CASE("fixed-label energy vanishes at a certain anchor") {
  const auto p = logistic_1d(100.0);
  const Vector x = v1(1.0);
  const ProbeFunction g = fixed_label_g(p, 1.0, Regularizer(x, 0.3));
  CHECK(g(x) == doctest::Approx(0.0).epsilon(1e-12));
  const ProbeFunction plain = fixed_label_g(p, 1.0);
  for (double a : {-2.0, -0.1, 0.0, 0.4, 3.0}) CHECK(plain(v1(a)) >= 0.0);
  CHECK_THROWS_AS(fixed_label_g(p, 2.0), ArityError);
}

TEST_CASE("single-member ensemble equals the plain energy") {
  const auto p = logistic_1d(1.5, -0.2);
  const ParamEnsemble e = draw_param_ensemble(*p, 0.0, 1, 3);
  const ProbeFunction a = ensemble_fixed_label_g(e, *p, 1.0);
  const ProbeFunction b = fixed_label_g(p, 1.0);
  for (double x : {-1.0, 0.0, 2.0}) CHECK(std::abs(a(v1(x)) - b(v1(x))) < 1e-12);
  CHECK_THROWS_AS(ensemble_fixed_label_g(ParamEnsemble{}, *p, 1.0), PreconditionError);
}

TEST_CASE("two symmetric members average their losses") {
  // member weights +1 and -1: at x = 0.7 their class-1 probabilities are s and 1 - s.
  const auto p = logistic_1d(1.0);
  ParamEnsemble e;
  e.center = *p->params();
  e.samples = {e.center.with_theta((Vector(2) << 1.0, 0.0).finished()),
               e.center.with_theta((Vector(2) << -1.0, 0.0).finished())};
  const double s = 1.0 / (1.0 + std::exp(-0.7));
  const double expect = 0.5 * (-std::log(s) - std::log(1.0 - s));
  CHECK(ensemble_fixed_label_g(e, *p, 1.0)(v1(0.7)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("self-contrast is minimal on the decision boundary") {
  const auto p = logistic_1d(2.0, -1.0);  // boundary at x = 0.5
  const ProbeFunction g = contrast_g(p, p);
  const double at_boundary = g(v1(0.5));
  CHECK(at_boundary == doctest::Approx(std::log(2.0)));
  for (double x : {-1.0, 0.0, 0.3, 0.7, 2.0}) CHECK(g(v1(x)) > at_boundary);
  const double q = 1.0 / (1.0 + std::exp(-(2.0 * 0.2 - 1.0)));
  CHECK(g(v1(0.2)) == doctest::Approx(bce(q, 1.0 - q)));
}

TEST_CASE("contrast of identical regressors is one everywhere") {
  const auto p = linear_1d(2.0, 1.0);
  const ProbeFunction g = contrast_g(p, p);
  for (double x : {-3.0, 0.0, 5.0}) CHECK(g(v1(x)) == 1.0);
  CHECK_THROWS(contrast_g(p, logistic_1d(1.0)));
}

TEST_CASE("regression contrast term") {
  const auto a = linear_1d(1.0, 0.0);
  const auto b = linear_1d(1.0, 0.5);
  CHECK(regression_contrast_g(a, a, 0.5)(v1(1.0)) == 1.0);
  CHECK(regression_contrast_g(a, b, 0.5)(v1(1.0)) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK_THROWS_AS(regression_contrast_g(a, b, 0.0), PreconditionError);
  CHECK_THROWS_AS(regression_contrast_g(a, b, -1.0), PreconditionError);
}

TEST_CASE("risky energies") {
  const auto p = logistic_1d(3.0);
  RiskyOptions o;
  CHECK(risky_g(p, o)(v1(0.0)) == doctest::Approx(0.0));
  o.mode = RiskyMode::Entropy;
  CHECK(risky_g(three_leaf_tree(), o)(v1(-1.0)) == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
  CHECK(risky_g(three_leaf_tree(), o)(v1(0.5)) > -std::log(3.0));
  CHECK_THROWS(risky_g(linear_1d(1.0, 0.0), o));
}

TEST_CASE("zero-variance parameter ensemble reduces to self-contrast") {
  const auto p = logistic_1d(2.0, -1.0);
  const ParamEnsemble e = draw_param_ensemble(*p, 0.0, 4, 9);
  const ProbeFunction g = param_sensitive_g(e, p);
  const ProbeFunction self = contrast_g(p, p);
  for (double x : {-1.0, 0.5, 1.3}) CHECK(g(v1(x)) == doctest::Approx(self(v1(x))).epsilon(1e-12));
  CHECK_THROWS(param_sensitive_g(ParamEnsemble{}, p));
}

TEST_CASE("parameter-sensitive energy at the origin by hand") {
  // p* = sigmoid(x + 0.2); members with biases 0.5 and -0.5, slope 1.
  const auto p = logistic_1d(1.0, 0.2);
  ParamEnsemble e;
  e.center = *p->params();
  e.samples = {e.center.with_theta((Vector(2) << 1.0, 0.5).finished()),
               e.center.with_theta((Vector(2) << 1.0, -0.5).finished())};
  const auto s = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double t = 1.0 - s(0.2);
  const double expect = 0.5 * (bce(s(0.5), t) + bce(s(-0.5), t));
  CHECK(param_sensitive_g(e, p)(v1(0.0)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("regression sensitivity terms") {
  const auto p = linear_1d(1.0, 0.0);
  const ParamEnsemble zero = draw_param_ensemble(*p, 0.0, 3, 1);
  const Regularizer reg(v1(0.0), 0.5);
  CHECK(regression_sensitive_g(zero, p, 1.0, reg)(v1(2.0)) == doctest::Approx(1.0 + 0.5 * 4.0));
  ParamEnsemble e;
  e.center = *p->params();
  e.samples = {e.center, e.center.with_theta((Vector(2) << 1.0, 0.7).finished())};
  CHECK(regression_sensitive_g(e, p, 0.7)(v1(1.0)) == doctest::Approx(0.5 + std::exp(-1.0) / 2).epsilon(1e-12));
  CHECK_THROWS(regression_sensitive_g(e, p, 0.0));
}

TEST_CASE("certainty pin") {
  const auto t = three_leaf_tree();
  const WeightedTerm pin = certainty_pin_g(t, 1, 4.0);
  CHECK(pin.weight == 4.0);
  CHECK(pin.term->value(v1(0.5)) == 0.0);
  CHECK(pin.term->value(v1(-1.0)) == doctest::Approx(2.0 / 3.0));
  CHECK(ProbeFunction({pin})(v1(-1.0)) == doctest::Approx(8.0 / 3.0));
  CHECK_FALSE(ProbeFunction({pin}).differentiable());
  CHECK_THROWS(certainty_pin_g(t, 3, 1.0));
}

TEST_CASE("regularizer value and gradient") {
  Vector a(2), w(2), x(2);
  a << 1.0, -1.0;
  w << 1.0, 2.0;
  x << 2.0, 1.0;
  const Regularizer r(a, 0.5, 3.0, w);
  CHECK(r.value(x) == doctest::Approx(0.5 * (1.0 + 2.0 * 8.0)));
  const Vector g = r.gradient(x);
  CHECK(g[0] == doctest::Approx(0.5 * 3.0));
  CHECK(g[1] == doctest::Approx(0.5 * 2.0 * 3.0 * 4.0));
}

TEST_CASE("energies compose additively") {
  Matrix q = Matrix::Identity(2, 2);
  const ProbeFunction g = ProbeFunction{}
                              .with_term(std::make_shared<QuadraticTerm>(q, Vector::Zero(2)), 2.0)
                              .with_term(std::make_shared<FunctionTerm>([](const Vector& x) { return x.sum(); },
                                                                        [](const Vector& x) {
                                                                          return Vector::Ones(x.size());
                                                                        }));
  Vector x(2);
  x << 1.0, 2.0;
  CHECK(g(x) == doctest::Approx(2.0 * 5.0 + 3.0));
  CHECK(g.gradient(x).isApprox((Vector(2) << 5.0, 9.0).finished()));
  CHECK(g.term_values(x).size() == 2);
  CHECK(g.natural_mode() == GradientMode::Exact);
}
