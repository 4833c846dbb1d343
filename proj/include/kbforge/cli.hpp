#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"
#include "kbforge/detectors.hpp"
#include "kbforge/forest.hpp"

namespace kbforge {

enum class BackendKind { RuleOracle, Llm, Replay };

/// Resolved run configuration. Layering, lowest first: built-in defaults,
/// the --config JSON file, KBFORGE_<KEY> environment variables, flags.
struct RunConfig {
  std::optional<std::filesystem::path> dataset;
  bool synth = false;
  double jitter = 0.3;
  std::optional<std::filesystem::path> profiles;
  std::string label_column = "label";

  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  ForestParams forest;
  std::size_t k = 10;

  KbConfig kb = KbConfig::ShortKb;
  KbSource kb_source = KbSource::Canonical;

  BackendKind backend = BackendKind::RuleOracle;
  LlmEndpointConfig llm;
  RuleOracleConfig rule_oracle;
  std::optional<std::filesystem::path> replay_dir;
  std::optional<std::filesystem::path> record_dir;

  std::size_t n_per_class = 500;
  bool best_effort = false;
};

/// Every key accepted in the config file; env names are KBFORGE_ + the key in
/// upper case.
std::span<const std::string_view> config_keys();

/// Defaults overlaid with `layer` (a flat JSON object). Throws ConfigError on
/// unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& layer);

/// Flat JSON view of a config; config_from_json(config_to_json(c)) == c.
nlohmann::json config_to_json(const RunConfig& config);

/// Reads KBFORGE_* variables for known keys into a flat JSON layer. Values
/// are parsed as JSON when possible, else taken as strings.
nlohmann::json env_layer(const char* const* envp);

/// First 16 hex digits of SHA-256 over the canonical config JSON.
std::string run_id(const RunConfig& config);

/// Entry point: exit 0 on success, 2 for invalid configuration or usage,
/// 1 for runtime failures. Failures print a JSON error report to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const char* const* envp = nullptr);

}  // namespace kbforge
