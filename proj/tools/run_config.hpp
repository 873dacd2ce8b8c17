#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "srfl/dataset.hpp"
#include "srfl/errors.hpp"
#include "srfl/federated.hpp"
#include "srfl/models.hpp"
#include "srfl/rf_oracle.hpp"
#include "srfl/scenario.hpp"

namespace srfl::cli {

// Bad flags or config values; maps to exit code 2.
class UsageError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

struct DatasetOptions {
  std::string profile = "training1";
  int contexts = 50;
  int test_contexts = 0;
  std::optional<int> variations;  // profile default when unset
  int max_aps = 6;
  int max_stas = 4;
  bool write_metrics = true;
  scenario::GeneratorOptions generator;
};

struct RunConfig {
  std::uint64_t seed = 1;
  DatasetOptions dataset;
  oracle::RadioParams radio;
  data::SplitFractions split;
  models::ModelConfig model = models::ModelConfig::defaults(models::Arch::kFederationS);
  fed::FedConfig fed;
  std::size_t centralized_epochs = 20;
  std::string output_dir = ".";
  std::string preset;

  void validate() const;
};

// Installs the published hyperparameters of one of the three solutions.
void apply_preset(RunConfig& cfg, std::string_view name);

// Overrides every key present in the JSON text; unknown keys are errors.
void apply_json(RunConfig& cfg, std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical JSON of the whole config. Execution-only knobs (workers, timing,
// output directory) are left out so they never change the hash.
std::string to_json(const RunConfig& cfg);
// JSON of the parts that determine the generated dataset.
std::string dataset_json(const RunConfig& cfg);

std::string config_hash(const RunConfig& cfg);
std::string dataset_hash(const RunConfig& cfg);

// Output root: SRFL_OUTPUT_ROOT when set, else `fallback`. Relative paths are
// resolved against it.
std::filesystem::path output_root(const std::string& fallback);
std::filesystem::path resolve_output(const std::string& path, const std::string& fallback_root);

}  // namespace srfl::cli
