#pragma once

// Runs the probekit binary on every example spec, reruns each from its
// manifest and compares outputs byte for byte.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#ifndef PROBEKIT_CLI
#error "PROBEKIT_CLI must name the probekit binary"
#endif
#ifndef PROBEKIT_CONFIG_DIR
#error "PROBEKIT_CONFIG_DIR must name the example spec directory"
#endif

namespace cli_check {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline int probekit(const std::string& args) {
  const std::string cmd = std::string("\"") + PROBEKIT_CLI + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

// Names of the files that differ between two output directories.
inline std::vector<std::string> differing(const fs::path& a, const fs::path& b,
                                          const std::vector<std::string>& files) {
  std::vector<std::string> out;
  for (const auto& f : files) {
    if (!fs::exists(a / f) || !fs::exists(b / f) || slurp(a / f) != slurp(b / f)) out.push_back(f);
  }
  return out;
}

}  // namespace cli_check

inline void cli_determinism(bool& pass, std::ostringstream& detail) {
  namespace fs = std::filesystem;
  using cli_check::quoted;
  const std::vector<std::string> files{"samples.csv", "stats.json", "plot.csv", "manifest.json"};
  const fs::path work = fs::temp_directory_path() / ("probekit_ac10_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);

  int specs = 0;
  std::vector<fs::path> configs;
  for (const auto& e : fs::directory_iterator(PROBEKIT_CONFIG_DIR)) {
    if (e.path().extension() == ".json") configs.push_back(e.path());
  }
  std::sort(configs.begin(), configs.end());
  for (const auto& spec : configs) {
    const std::string name = spec.stem().string();
    const fs::path first = work / (name + "_spec");
    const fs::path second = work / (name + "_manifest");
    if (int rc = cli_check::probekit("probe " + quoted(spec) + " -o " + quoted(first)); rc != 0) {
      pass = false;
      detail << " [" << name << ": exit " << rc << "]";
      continue;
    }
    if (int rc = cli_check::probekit("probe " + quoted(first / "manifest.json") + " -o " + quoted(second)); rc != 0) {
      pass = false;
      detail << " [" << name << " rerun: exit " << rc << "]";
      continue;
    }
    for (const auto& f : cli_check::differing(first, second, files)) {
      pass = false;
      detail << " [" << name << ": " << f << " differs]";
    }
    ++specs;
  }

  // train, then probe with the saved models.
  const fs::path base = fs::path(PROBEKIT_CONFIG_DIR) / "counterfactual_credit.json";
  const fs::path models = work / "models";
  bool trained = cli_check::probekit("train " + quoted(base) + " -o " + quoted(models)) == 0;
  if (trained) {
    std::ifstream in(base);
    nlohmann::json j = nlohmann::json::parse(in);
    j["models"] = nlohmann::json::array({{{"path", (models / "model0.json").string()}}});
    const fs::path loaded = work / "loaded.json";
    std::ofstream(loaded) << j.dump(2);
    const fs::path a = work / "combined";
    const fs::path b = work / "loaded";
    trained = cli_check::probekit("probe " + quoted(base) + " -o " + quoted(a)) == 0 &&
              cli_check::probekit("probe " + quoted(loaded) + " -o " + quoted(b)) == 0 &&
              cli_check::differing(a, b, {"samples.csv", "stats.json", "plot.csv"}).empty();
  }
  if (!trained) {
    pass = false;
    detail << " [train + probe with saved model differs from the combined run]";
  }

  if (specs == 0) pass = false;
  detail << specs << " example specs rerun from their manifests byte-identically; train + saved-model probe "
         << (trained ? "matches" : "differs");
  if (pass) fs::remove_all(work);
}
