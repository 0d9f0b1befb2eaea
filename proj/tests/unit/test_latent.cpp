#include <doctest.h>

#include <oracles.hpp>
#include <probekit/errors.hpp>
#include <probekit/latent.hpp>
#include <probekit/metrics.hpp>
#include <probekit/sampler.hpp>

using namespace probekit;

namespace {

// 0.5 ||x - m||^2
ProbeFunction centered(const Vector& m) {
  const Eigen::Index d = m.size();
  return ProbeFunction{}.with_term(
      std::make_shared<QuadraticTerm>(0.5 * Matrix::Identity(d, d), -m, 0.5 * m.squaredNorm()));
}

}  // namespace

TEST_CASE("identity pushforward leaves the energy unchanged") {
  Vector m(3);
  m << 1.0, -2.0, 0.5;
  const ProbeFunction g = centered(m);
  const ProbeFunction h = pushforward_probe(g, std::make_shared<LatentMap>(LatentMap::identity(3)));
  Vector z(3);
  z << 0.3, 0.1, -0.7;
  CHECK(h(z) == g(z));
  CHECK((h.gradient(z) - g.gradient(z)).norm() < 1e-12);
}

TEST_CASE("affine pushforward of a Gaussian energy") {
  Matrix a(2, 2);
  a << 2.0, 0.5, -0.3, 1.0;
  Vector c(2), m(2);
  c << 1.0, -1.0;
  m << 0.5, 2.0;
  const auto phi = std::make_shared<LatentMap>(LatentMap::affine(a, c));
  const ProbeFunction h = pushforward_probe(centered(m), phi);
  Vector z(2);
  z << 0.2, -0.4;
  CHECK((h.gradient(z) - a.transpose() * (a * z + c - m)).norm() < 1e-12);
  CHECK((h.gradient(z) - oracle::gradient_fd([&](const Vector& v) { return h(v); }, z)).norm() < 1e-7);

  ChainConfig cfg;
  cfg.tau = Temperature(0.2);
  cfg.step_size = 0.01;
  cfg.n_steps = 20000;
  cfg.seed = 4;
  const ProbeReport latent = run_chain(Vector::Zero(2), h, cfg);
  const ProbeReport pushed = push_samples(latent, *phi);
  const Vector se = batch_means_standard_error(pushed.samples);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(pushed.mean[i] - m[i]) < 3.0 * se[i]);
}

TEST_CASE("plane embedding keeps samples on the plane near the projection") {
  Matrix a(3, 2);
  a << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;  // plane x2 = x0 + x1
  const Vector c = Vector::Zero(3);
  Vector p(3);
  p << 1.0, 0.0, 3.0;
  const auto phi = std::make_shared<LatentMap>(LatentMap::affine(a, c));
  ChainConfig cfg;
  cfg.tau = Temperature(0.05);
  cfg.step_size = 0.02;
  cfg.n_steps = 10000;
  cfg.seed = 2;
  const ProbeReport pushed = push_samples(run_chain(Vector::Zero(2), pushforward_probe(centered(p), phi), cfg), *phi);
  Vector normal(3);
  normal << 1.0, 1.0, -1.0;
  for (Eigen::Index i = 0; i < pushed.samples.rows(); ++i) CHECK(std::abs(pushed.samples.row(i).dot(normal)) < 1e-10);
  const Vector proj = p - normal * (normal.dot(p) / normal.squaredNorm());
  const Vector se = batch_means_standard_error(pushed.samples);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(pushed.mean[i] - proj[i]) < 3.0 * se[i] + 1e-12);
}

TEST_CASE("dimension mismatch is rejected") {
  const auto phi = std::make_shared<LatentMap>(LatentMap::identity(2));
  CHECK_THROWS(pushforward_probe(centered(Vector::Zero(3)), phi));
}

TEST_CASE("tanh layer jacobian and json round trip") {
  LatentLayer l1{Matrix::Random(4, 2), Vector::Random(4), Activation::Tanh};
  LatentLayer l2{Matrix::Random(3, 4), Vector::Random(3), Activation::Identity};
  const LatentMap phi({l1, l2});
  Vector z(2);
  z << 0.3, -0.6;
  Matrix fd(3, 2);
  for (int k = 0; k < 3; ++k) {
    fd.row(k) = oracle::gradient_fd([&](const Vector& v) { return phi.apply(v)[k]; }, z).transpose();
  }
  CHECK((phi.jacobian(z) - fd).norm() < 1e-8);
  const LatentMap back = LatentMap::from_json(phi.to_json());
  CHECK(back.apply(z) == phi.apply(z));
}

TEST_CASE("standardizing map and bounds") {
  Vector center(2), scale(2);
  center << 10.0, -1.0;
  scale << 2.0, 0.5;
  const LatentMap phi = LatentMap::standardizing(center, scale);
  Vector z(2);
  z << 1.0, -2.0;
  CHECK(phi.apply(z).isApprox((Vector(2) << 12.0, -2.0).finished()));
  const Bounds b = standardize_bounds(Bounds(Vector::Constant(2, 8.0), Vector::Constant(2, 12.0)), center, scale);
  CHECK(b.lo[0] == doctest::Approx(-1.0));
  CHECK(b.hi[1] == doctest::Approx(26.0));
}
