#pragma once

#include <memory>

#include <spdlog/spdlog.h>

namespace probekit {

/// Shared library logger. Level comes from PROBEKIT_LOG_LEVEL
/// (trace|debug|info|warn|error|off), default warn.
spdlog::logger& log();

}  // namespace probekit
