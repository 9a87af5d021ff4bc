#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "afb/pipeline.hpp"

namespace afb {

/// Flat `key = value` run configuration. Blank lines and `#` comments are
/// ignored; unknown keys and malformed values raise ConfigError; missing keys
/// keep the PipelineConfig defaults.
///
/// Keys: epsilon_h lambda_p epsilon_l lambda_u budget radius u_threshold
/// stride patch d_k d_v tau_d seed memory_policy absorb_interval, plus
/// coverage_min normalize_keys absorb_margin.
PipelineConfig parse_run_config(std::istream& in, const std::string& source = "<config>");
PipelineConfig load_run_config(const std::filesystem::path& path);

/// Applies a single key/value pair.
void apply_run_config_key(PipelineConfig& cfg, const std::string& key, const std::string& value);

/// Canonical text form, one key per line, readable by parse_run_config.
std::string to_text(const PipelineConfig& cfg);

}  // namespace afb
