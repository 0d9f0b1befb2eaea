#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <probekit/errors.hpp>
#include <probekit/predictor.hpp>
#include <probekit/sampler.hpp>
#include <probekit/types.hpp>

namespace probekit::driver {

inline constexpr int kSpecVersion = 1;
inline constexpr int kManifestVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitTraining = 3,
  kExitSampling = 4,
  kExitOracle = 5,
};

/// Failure of one pipeline stage; what() reads "<stage>: <cause>".
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& cause, int exit_code)
      : Error(stage + ": " + cause), stage_(std::move(stage)), exit_code_(exit_code) {}

  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

enum class Scenario { FixedLabel, Contrast, Risky, ParamSensitive, WinePin, Latent };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// Either a named generator or a CSV file.
struct DatasetSource {
  std::string generator;
  nlohmann::json params = nlohmann::json::object();
  std::optional<std::uint64_t> seed;  // generator seed; derived from the master seed when unset
  std::filesystem::path csv;
  std::filesystem::path schema;  // optional sidecar schema for csv
  std::optional<bool> classification;
};

/// A model to train (kind + resolved hyperparameters) or to load (path).
struct ModelSection {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  std::filesystem::path path;
};

/// Per-feature override; lo / hi are a number, "anchor" or null (keep the base bound).
struct FeatureBound {
  std::string feature;
  nlohmann::json lo;
  nlohmann::json hi;
};

struct BoundsSpec {
  bool observed = false;  // start from the training data's observed range
  std::vector<FeatureBound> features;

  bool empty() const { return !observed && features.empty(); }
};

/// Chain starting points: "mean", "anchor", "points" (training rows, optionally
/// of one label) or "vectors" (literal coordinates).
struct InitSpec {
  std::string kind = "mean";
  std::optional<int> label;
  std::vector<std::vector<double>> vectors;
};

struct ProbeSpec {
  std::uint64_t seed = 0;
  DatasetSource dataset;
  std::vector<ModelSection> models;
  Scenario scenario = Scenario::FixedLabel;
  nlohmann::json scenario_params = nlohmann::json::object();
  ChainConfig chain;
  bool gradient_mode_set = false;  // otherwise the energy's natural mode is used
  int chains = 1;
  int threads = 1;
  InitSpec init;
  BoundsSpec bounds;
  std::filesystem::path output_dir;

  /// Canonical form with every default spelled out; output_dir is omitted.
  nlohmann::json to_json() const;
};

/// Validates a spec document, or the spec embedded in a manifest, filling
/// defaults. Relative paths resolve against `base_dir`. Throws StageError
/// ("config", exit 2).
ProbeSpec parse_spec(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ProbeSpec load_spec(const std::filesystem::path& path);

Dataset load_data(const ProbeSpec& spec);

/// Trains (or loads) every model section in order.
std::vector<PredictorPtr> build_models(const ProbeSpec& spec, const Dataset& data);

/// Trains the spec's models and saves them as model<i>.json under `dir`.
std::vector<std::filesystem::path> train_models(const ProbeSpec& spec, const std::filesystem::path& dir);

struct RunResult {
  ProbeReport report;
  nlohmann::json manifest;
  std::vector<std::filesystem::path> outputs;
};

/// Full pipeline. Writes samples.csv, stats.json, plot.csv and manifest.json
/// into spec.output_dir; on failure nothing written by this call remains.
RunResult run(const ProbeSpec& spec);

/// Summary statistics of a samples CSV (header = feature names). A file with
/// no content or only a header gives an empty report.
ProbeReport report_from_csv(const std::filesystem::path& samples_csv);

/// stats.json content: the report without its sample rows.
nlohmann::json stats_json(const ProbeReport& report);

struct OracleOptions {
  int n = 2000;
  int d = 4;
  double tau = 0.5;
  double offset = 2.0;  // target w = mean prediction + offset
  long steps = 200000;
  double step_size = 0.15;
  std::uint64_t seed = 1;
  double mean_standard_errors = 3.0;
  double covariance_tolerance = 0.10;
  double identity_tolerance = 1e-8;
};

struct OracleCheck {
  double max_mean_z = 0.0;
  double covariance_error = 0.0;
  double identity_error = 0.0;
  double acceptance = 0.0;
  bool pass = false;

  nlohmann::json to_json() const;
};

/// Samples the data-space regression energy and compares against its closed form.
OracleCheck verify_oracle(const OracleOptions& options);

}  // namespace probekit::driver
