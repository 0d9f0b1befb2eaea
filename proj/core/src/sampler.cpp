#include "probekit/sampler.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "probekit/errors.hpp"
#include "probekit/io.hpp"
#include "probekit/log.hpp"

namespace probekit {

namespace {

Vector standard_normal(Eigen::Index d, Rng& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Vector e(d);
  for (Eigen::Index i = 0; i < d; ++i) e[i] = n01(rng);
  return e;
}

Vector drift_at(const ProbeFunction& g, const Vector& x, const ChainConfig& cfg, Rng& rng) {
  switch (cfg.gradient_mode) {
    case GradientMode::Exact: return g.gradient(x);
    case GradientMode::Smoothed:
      return smoothed_gradient(g, x, cfg.smoothing.sigma, cfg.smoothing.samples, rng,
                               cfg.smoothing.inverse_sigma_scaling);
    case GradientMode::None: return Vector::Zero(x.size());
  }
  return Vector::Zero(x.size());
}

std::vector<std::string> default_names(Eigen::Index d) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < d; ++i) names.push_back("x" + std::to_string(i));
  return names;
}

// Infinite bounds are written as null.
nlohmann::json bound_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return out;
}

Vector bound_from_json(const nlohmann::json& j, double sign) {
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = j[i].is_null() ? sign * std::numeric_limits<double>::infinity() : j[i].get<double>();
  }
  return v;
}

}  // namespace

void ChainConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw PreconditionError("chain: step size must be > 0");
  if (n_steps < 0) throw PreconditionError("chain: n_steps must be >= 0");
  const long b = effective_burn_in();
  if (b < 0 || b > n_steps) throw PreconditionError("chain: burn_in must lie in [0, n_steps]");
  if (thinning < 1) throw PreconditionError("chain: thinning must be >= 1");
  if (gradient_mode == GradientMode::Smoothed) {
    if (!(smoothing.sigma > 0.0)) throw PreconditionError("chain: smoothing sigma must be > 0");
    if (smoothing.samples < 1) throw PreconditionError("chain: smoothing sample count must be >= 1");
  }
  if (bounds && (bounds->lo.array() > bounds->hi.array()).any()) {
    throw PreconditionError("chain: bounds have lo > hi");
  }
}

nlohmann::json ChainConfig::to_json() const {
  nlohmann::json j;
  j["tau"] = tau.value();
  j["step_size"] = step_size;
  j["n_steps"] = n_steps;
  j["burn_in"] = effective_burn_in();
  j["thinning"] = thinning;
  j["seed"] = seed;
  j["gradient_mode"] = to_string(gradient_mode);
  j["smoothing"] = {{"sigma", smoothing.sigma},
                    {"samples", smoothing.samples},
                    {"inverse_sigma_scaling", smoothing.inverse_sigma_scaling},
                    {"reuse_drift_in_reverse", smoothing.reuse_drift_in_reverse}};
  if (bounds) j["bounds"] = {{"lo", bound_json(bounds->lo)}, {"hi", bound_json(bounds->hi)}};
  return j;
}

ChainConfig ChainConfig::from_json(const nlohmann::json& j) {
  ChainConfig c;
  c.tau = Temperature(j.value("tau", 1.0));
  c.step_size = j.value("step_size", c.step_size);
  c.n_steps = j.value("n_steps", c.n_steps);
  if (j.contains("burn_in")) c.burn_in = j.at("burn_in").get<long>();
  c.thinning = j.value("thinning", c.thinning);
  c.seed = j.value("seed", c.seed);
  if (j.contains("gradient_mode")) c.gradient_mode = gradient_mode_from_string(j.at("gradient_mode").get<std::string>());
  if (j.contains("smoothing")) {
    const auto& s = j.at("smoothing");
    c.smoothing.sigma = s.value("sigma", c.smoothing.sigma);
    c.smoothing.samples = s.value("samples", c.smoothing.samples);
    c.smoothing.inverse_sigma_scaling = s.value("inverse_sigma_scaling", c.smoothing.inverse_sigma_scaling);
    c.smoothing.reuse_drift_in_reverse = s.value("reuse_drift_in_reverse", c.smoothing.reuse_drift_in_reverse);
  }
  if (j.contains("bounds")) {
    c.bounds = Bounds(bound_from_json(j.at("bounds").at("lo"), -1.0), bound_from_json(j.at("bounds").at("hi"), 1.0));
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

ProbeReport ProbeReport::from_samples(Matrix samples, std::vector<std::string> feature_names) {
  ProbeReport r;
  if (feature_names.empty()) feature_names = default_names(samples.cols());
  if (static_cast<Eigen::Index>(feature_names.size()) != samples.cols()) {
    throw PreconditionError("report: feature name count does not match sample dimension");
  }
  r.samples = std::move(samples);
  r.feature_names = std::move(feature_names);
  const Eigen::Index n = r.samples.rows();
  if (n == 0) {
    r.mean = Vector::Zero(r.samples.cols());
    r.std = Vector::Zero(r.samples.cols());
    return r;
  }
  r.mean = r.samples.colwise().mean().transpose();
  if (n > 1) {
    const Matrix centered = r.samples.rowwise() - r.mean.transpose();
    r.std = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
  } else {
    r.std = Vector::Zero(r.samples.cols());
  }
  return r;
}

nlohmann::json ProbeReport::to_json() const {
  nlohmann::json j;
  j["feature_names"] = feature_names;
  j["count"] = samples.rows();
  j["acceptance_rate"] = acceptance_rate;
  j["accepted"] = accepted;
  j["proposed"] = proposed;
  j["mean"] = std::vector<double>(mean.begin(), mean.end());
  j["std"] = std::vector<double>(std.begin(), std.end());
  j["stats"] = stats;
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    const Vector row = samples.row(i).transpose();
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["samples"] = std::move(rows);
  return j;
}

void ProbeReport::write_csv(const std::filesystem::path& path) const {
  CsvDocument doc;
  doc.header = feature_names;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < samples.cols(); ++c) row.push_back(format_double(samples(i, c)));
    doc.rows.push_back(std::move(row));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  probekit::write_csv(out, doc);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------

double log_transition_density(const Vector& to, const Vector& from, const Vector& drift_from, double eta,
                              double tau) {
  return -(to - from + eta * drift_from).squaredNorm() / (4.0 * eta * tau);
}

double log_acceptance_ratio(const Vector& x, double g_x, const Vector& drift_x, const Vector& y, double g_y,
                            const Vector& drift_y, double eta, double tau) {
  return -(g_y - g_x) / tau + log_transition_density(x, y, drift_y, eta, tau) -
         log_transition_density(y, x, drift_x, eta, tau);
}

Vector smoothed_gradient(const ProbeFunction& g, const Vector& x, double sigma, int samples, Rng& rng,
                         bool inverse_sigma_scaling) {
  if (!(sigma > 0.0)) throw PreconditionError("smoothed_gradient: sigma must be > 0");
  if (samples < 1) throw PreconditionError("smoothed_gradient: need at least one sample");
  Vector acc = Vector::Zero(x.size());
  const int pairs = samples / 2;
  for (int j = 0; j < pairs; ++j) {
    const Vector e = standard_normal(x.size(), rng);
    acc += (g.evaluate(x + sigma * e) - g.evaluate(x - sigma * e)) * e;
  }
  if (samples % 2 == 1) {
    // Baseline subtraction keeps the odd term unbiased and exact for constant G.
    const Vector e = standard_normal(x.size(), rng);
    acc += (g.evaluate(x + sigma * e) - g.evaluate(x)) * e;
  }
  acc /= static_cast<double>(samples);
  if (inverse_sigma_scaling) acc /= sigma;
  return acc;
}

ChainState init_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.bounds) {
    if (cfg.bounds->dimension() != x0.size()) throw PreconditionError("chain: bounds dimension mismatch");
    if (!cfg.bounds->contains(x0)) throw PreconditionError("chain: start point lies outside the bounds");
  }
  if (cfg.gradient_mode == GradientMode::Exact && !g.differentiable()) {
    throw NotDifferentiableError("chain: exact gradients requested for a non-differentiable energy; use smoothed mode");
  }
  ChainState s;
  s.x = x0;
  s.g_value = g.evaluate(x0);
  if (!std::isfinite(s.g_value)) throw PreconditionError("chain: G is not finite at the start point");
  s.grad = drift_at(g, x0, cfg, rng);
  return s;
}

ChainState mala_step(ChainState state, const ProbeFunction& g, const ChainConfig& cfg, Rng& rng) {
  const double eta = cfg.step_size;
  const double tau = cfg.tau.value();
  // Smoothed drifts are re-estimated at every step; exact ones stay cached.
  if (cfg.gradient_mode == GradientMode::Smoothed) state.grad = drift_at(g, state.x, cfg, rng);

  const Vector noise = standard_normal(state.x.size(), rng);
  Vector y = state.x - eta * state.grad + std::sqrt(2.0 * eta * tau) * noise;
  if (cfg.bounds) y = cfg.bounds->clip(y);
  ++state.proposed;

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);

  const double g_y = g.evaluate(y);
  if (!std::isfinite(g_y) || !y.allFinite()) {
    ++state.rejected_nonfinite;
    return state;
  }

  Vector drift_y;
  double log_alpha = 0.0;
  switch (cfg.gradient_mode) {
    case GradientMode::None:
      drift_y = Vector::Zero(y.size());
      log_alpha = -(g_y - state.g_value) / tau;
      break;
    case GradientMode::Exact:
      drift_y = g.gradient(y);
      if (!drift_y.allFinite()) {
        ++state.rejected_nonfinite;
        return state;
      }
      log_alpha = log_acceptance_ratio(state.x, state.g_value, state.grad, y, g_y, drift_y, eta, tau);
      break;
    case GradientMode::Smoothed: {
      const Vector reverse = cfg.smoothing.reuse_drift_in_reverse ? state.grad : drift_at(g, y, cfg, rng);
      log_alpha = log_acceptance_ratio(state.x, state.g_value, state.grad, y, g_y, reverse, eta, tau);
      drift_y = reverse;
      break;
    }
  }

  if (std::log(u) < log_alpha) {
    state.x = std::move(y);
    state.g_value = g_y;
    state.grad = std::move(drift_y);
    ++state.accepted;
  }
  return state;
}

ProbeReport run_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg) {
  Rng rng(cfg.seed);
  ChainState state = init_chain(x0, g, cfg, rng);
  const long burn = cfg.effective_burn_in();
  Matrix samples(cfg.expected_samples(), x0.size());
  Eigen::Index row = 0;
  for (long t = 0; t < cfg.n_steps; ++t) {
    state = mala_step(std::move(state), g, cfg, rng);
    if (t >= burn && (t - burn + 1) % cfg.thinning == 0) samples.row(row++) = state.x.transpose();
  }
  if (state.rejected_nonfinite > 0) {
    log().warn("chain: {} proposals rejected for non-finite energy or gradient", state.rejected_nonfinite);
  }
  ProbeReport report = ProbeReport::from_samples(std::move(samples), {});
  report.accepted = state.accepted;
  report.proposed = state.proposed;
  report.acceptance_rate = state.proposed > 0 ? static_cast<double>(state.accepted) / state.proposed : 0.0;
  log().debug("chain: {} steps, acceptance {:.3f}", cfg.n_steps, report.acceptance_rate);
  return report;
}

ProbeReport run_tree_chain(const Vector& x0, const ProbeFunction& g, const ChainConfig& cfg) {
  if (cfg.gradient_mode == GradientMode::Exact) {
    throw NotDifferentiableError("tree chain: exact gradients are unavailable for tree energies");
  }
  if (cfg.gradient_mode != GradientMode::Smoothed) throw PreconditionError("tree chain: requires smoothed mode");
  return run_chain(x0, g, cfg);
}

ProbeReport run_chains(const std::vector<Vector>& starts, const ProbeFunction& g, const ChainConfig& cfg,
                       int threads) {
  if (starts.empty()) throw PreconditionError("run_chains: no start points");
  cfg.validate();
  std::vector<ProbeReport> reports(starts.size());
  std::vector<std::exception_ptr> errors(starts.size());
  auto work = [&](std::size_t i) {
    try {
      ChainConfig c = cfg;
      c.seed = derive_seed(cfg.seed, i);
      reports[i] = run_chain(starts[i], g, c);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min<std::size_t>(threads, starts.size()));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < starts.size(); i += n_threads) work(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Eigen::Index total = 0;
  for (const auto& r : reports) total += r.samples.rows();
  Matrix merged(total, starts.front().size());
  Eigen::Index row = 0;
  long accepted = 0;
  long proposed = 0;
  for (const auto& r : reports) {
    merged.middleRows(row, r.samples.rows()) = r.samples;
    row += r.samples.rows();
    accepted += r.accepted;
    proposed += r.proposed;
  }
  ProbeReport out = ProbeReport::from_samples(std::move(merged), {});
  out.accepted = accepted;
  out.proposed = proposed;
  out.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
  return out;
}

ParamEnsemble draw_param_ensemble(const Predictor& p_star, double sigma_theta, int m, std::uint64_t seed) {
  const auto center = p_star.params();
  if (!center) throw PreconditionError("draw_param_ensemble: " + to_string(p_star.kind()) + " has no parameter vector");
  if (!(sigma_theta >= 0.0) || !std::isfinite(sigma_theta)) {
    throw PreconditionError("draw_param_ensemble: sigma_theta must be >= 0");
  }
  if (m < 1) throw PreconditionError("draw_param_ensemble: ensemble size must be >= 1");
  ParamEnsemble e{*center, sigma_theta, seed, {}};
  Rng rng(seed);
  e.samples.reserve(m);
  for (int i = 0; i < m; ++i) {
    e.samples.push_back(center->with_theta(center->theta() + sigma_theta * standard_normal(center->size(), rng)));
  }
  return e;
}

}  // namespace probekit
