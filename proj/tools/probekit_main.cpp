// probekit: generate data, train models, run probes and check the regression oracle.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <probekit/datasets.hpp>
#include <probekit/io.hpp>

#include "driver/driver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace probekit;
using namespace probekit::driver;

namespace {

// key=value; the value is read as JSON when it parses, else as a string.
json parse_params(const std::vector<std::string>& pairs) {
  json params = json::object();
  for (const auto& kv : pairs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw StageError("config", "--param expects key=value, got '" + kv + "'", kExitConfig);
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    json v = json::parse(value, nullptr, false);
    params[key] = v.is_discarded() ? json(value) : v;
  }
  return params;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probekit: sample inputs that probe a trained model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("probekit ") + PROBEKIT_VERSION);

  std::string generator;
  std::vector<std::string> gen_params;
  std::uint64_t gen_seed = 7;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset as CSV (features + label)");
  gen->add_option("generator", generator, "Generator name")->required();
  gen->add_option("-p,--param", gen_params, "Generator parameter key=value (repeatable)");
  gen->add_option("-s,--seed", gen_seed, "Generator seed");
  gen->add_option("-o,--out", gen_out, "Output CSV (default stdout)");

  std::string train_spec, train_dir = "models";
  auto* train = app.add_subcommand("train", "Train the models of a spec and save them as JSON");
  train->add_option("spec", train_spec, "Spec file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_dir, "Directory for model<i>.json");

  std::string probe_spec, probe_out;
  int probe_threads = 0;
  auto* probe = app.add_subcommand("probe", "Run a probe spec (or rerun a manifest)");
  probe->add_option("spec", probe_spec, "Spec or manifest file")->required()->check(CLI::ExistingFile);
  probe->add_option("-o,--out", probe_out, "Output directory (overrides the spec)");
  probe->add_option("-t,--threads", probe_threads, "Chain threads (results do not depend on it)");

  std::string report_csv, report_out;
  auto* report = app.add_subcommand("report", "Recompute summary statistics from a samples CSV");
  report->add_option("samples", report_csv, "Samples CSV")->required()->check(CLI::ExistingFile);
  report->add_option("-o,--out", report_out, "Output JSON (default stdout)");

  OracleOptions oracle;
  std::string oracle_out;
  auto* verify = app.add_subcommand("verify-oracle", "Check sampled regression targets against the closed form");
  verify->add_option("--n", oracle.n, "Rows");
  verify->add_option("--d", oracle.d, "Features");
  verify->add_option("--tau", oracle.tau, "Temperature");
  verify->add_option("--offset", oracle.offset, "Target offset from the mean prediction");
  verify->add_option("--steps", oracle.steps, "Chain length");
  verify->add_option("--step-size", oracle.step_size, "Langevin step size");
  verify->add_option("--seed", oracle.seed, "Data and chain seed");
  verify->add_option("-o,--out", oracle_out, "Also write the result JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) {
      const Dataset data = make_dataset(generator, parse_params(gen_params), gen_seed);
      std::ostringstream out;
      write_dataset_csv(out, data);
      write_text(gen_out, out.str());
    } else if (*train) {
      for (const auto& p : train_models(load_spec(train_spec), train_dir)) std::cout << p.string() << "\n";
    } else if (*probe) {
      ProbeSpec spec = load_spec(probe_spec);
      if (!probe_out.empty()) spec.output_dir = probe_out;
      if (probe_threads > 0) spec.threads = probe_threads;
      const RunResult r = run(spec);
      std::cout << r.report.size() << " samples, acceptance " << r.report.acceptance_rate << ", written to "
                << spec.output_dir.string() << "\n";
    } else if (*report) {
      write_text(report_out, stats_json(report_from_csv(report_csv)).dump(2) + "\n");
    } else if (*verify) {
      const OracleCheck c = verify_oracle(oracle);
      std::printf("mean error %.3f SE (limit %.1f), covariance error %.4f (limit %.2f), identity error %.2e, "
                  "acceptance %.3f: %s\n",
                  c.max_mean_z, oracle.mean_standard_errors, c.covariance_error, oracle.covariance_tolerance,
                  c.identity_error, c.acceptance, c.pass ? "ok" : "FAILED");
      if (!oracle_out.empty()) write_text(oracle_out, c.to_json().dump(2) + "\n");
      return c.pass ? kExitOk : kExitOracle;
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "probekit: %s\n", e.what());
    return e.exit_code();
  } catch (const Error& e) {
    std::fprintf(stderr, "probekit: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "probekit: %s\n", e.what());
    return kExitSampling;
  }
  return kExitOk;
}
