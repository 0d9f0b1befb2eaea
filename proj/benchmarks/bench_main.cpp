// Micro benchmarks for the sampler inner loop and predictor evaluation.

#include <benchmark/benchmark.h>

#include <probekit/datasets.hpp>
#include <probekit/linear_models.hpp>
#include <probekit/mlp.hpp>
#include <probekit/probing.hpp>
#include <probekit/sampler.hpp>
#include <probekit/svm.hpp>
#include <probekit/tree.hpp>

using namespace probekit;

namespace {

const Dataset& credit() {
  static const Dataset d = synthetic_credit(1000, 1);
  return d;
}

PredictorPtr model(int which) {
  static const PredictorPtr logistic = fit_logistic_regression(credit());
  static const PredictorPtr mlp = [] {
    MlpTrainOptions o;
    o.steps = 200;
    return fit_mlp(credit(), MlpSpec{{32, 32, 2}}, o);
  }();
  static const PredictorPtr svm = [] {
    SvmOptions o;
    o.kernel = Kernel::rbf(0.2);
    return fit_kernel_svm(credit().subset([] {
      std::vector<std::size_t> idx(300);
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      return idx;
    }()), o);
  }();
  static const PredictorPtr forest = [] {
    ForestOptions o;
    o.n_trees = 100;
    return fit_forest(credit(), o);
  }();
  switch (which) {
    case 0: return logistic;
    case 1: return mlp;
    case 2: return svm;
    default: return forest;
  }
}

const char* kNames[] = {"logistic", "mlp-32-32", "svm-rbf", "forest-100"};

void BM_PredictProba(benchmark::State& state) {
  const PredictorPtr m = model(static_cast<int>(state.range(0)));
  const Vector x = credit()[3].features;
  for (auto _ : state) benchmark::DoNotOptimize(m->predict_proba(x));
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_PredictProba)->DenseRange(0, 3);

void BM_InputGradient(benchmark::State& state) {
  const PredictorPtr m = model(static_cast<int>(state.range(0)));
  const Vector x = credit()[3].features;
  for (auto _ : state) benchmark::DoNotOptimize(m->input_gradient(x, GradientTarget::probability(1)));
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_InputGradient)->DenseRange(0, 2);

void BM_MalaStepExact(benchmark::State& state) {
  const PredictorPtr m = model(static_cast<int>(state.range(0)));
  const ProbeFunction g = fixed_label_g(m, 1.0, Regularizer(credit().feature_mean(), 0.05));
  ChainConfig cfg;
  cfg.tau = Temperature(0.05);
  cfg.step_size = 0.01;
  Rng rng(1);
  ChainState s = init_chain(credit().feature_mean(), g, cfg, rng);
  for (auto _ : state) s = mala_step(std::move(s), g, cfg, rng);
  state.SetLabel(kNames[state.range(0)]);
}
BENCHMARK(BM_MalaStepExact)->DenseRange(0, 2);

void BM_MalaStepSmoothedForest(benchmark::State& state) {
  const ProbeFunction g({certainty_pin_g(model(3), 1, 1.0)});
  ChainConfig cfg;
  cfg.tau = Temperature(0.05);
  cfg.step_size = 0.01;
  cfg.gradient_mode = GradientMode::Smoothed;
  cfg.smoothing.samples = static_cast<int>(state.range(0));
  cfg.smoothing.reuse_drift_in_reverse = state.range(1) != 0;
  Rng rng(1);
  ChainState s = init_chain(credit().feature_mean(), g, cfg, rng);
  for (auto _ : state) s = mala_step(std::move(s), g, cfg, rng);
}
BENCHMARK(BM_MalaStepSmoothedForest)->ArgsProduct({{8, 32}, {0, 1}});

void BM_SmoothedGradient(benchmark::State& state) {
  const ProbeFunction g = fixed_label_g(model(1), 1.0);
  const Vector x = credit().feature_mean();
  Rng rng(2);
  const int j = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(smoothed_gradient(g, x, 0.1, j, rng));
  state.SetItemsProcessed(state.iterations() * j);
}
BENCHMARK(BM_SmoothedGradient)->RangeMultiplier(4)->Range(4, 256);

void BM_RunChains(benchmark::State& state) {
  const ProbeFunction g = fixed_label_g(model(0), 1.0, Regularizer(credit().feature_mean(), 0.05));
  ChainConfig cfg;
  cfg.tau = Temperature(0.05);
  cfg.step_size = 0.01;
  cfg.n_steps = 2000;
  const std::vector<Vector> starts(4, credit().feature_mean());
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(run_chains(starts, g, cfg, threads));
}
BENCHMARK(BM_RunChains)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
