#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "probekit/predictor.hpp"

namespace probekit {

inline constexpr int kModelFormatVersion = 1;

/// Rebuilds any predictor from its versioned JSON document.
PredictorPtr predictor_from_json(const nlohmann::json& j);

void save_predictor(const Predictor& p, const std::filesystem::path& path);
PredictorPtr load_predictor(const std::filesystem::path& path);

}  // namespace probekit
