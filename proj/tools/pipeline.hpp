#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "run_config.hpp"
#include "srfl/eval_report.hpp"

namespace srfl::cli {

namespace fs = std::filesystem;

struct ContextEntry {
  int id = 0;
  scenario::ProfileKind profile = scenario::ProfileKind::kTraining1;
  int n_aps = 0;
  int n_stas = 0;
  int variations = 1;
};

struct DatasetManifest {
  std::string config_hash;
  RunConfig config;  // seed, dataset and radio sections only
  std::vector<ContextEntry> contexts;
};

// Writes nodes, context and metrics CSVs plus manifest.json into `dir`.
void generate_dataset(const RunConfig& cfg, const fs::path& dir, std::ostream& log);

DatasetManifest read_manifest(const fs::path& dir);
// Raw context table plus the deployments of every location variation.
data::Context load_context(const fs::path& dir, const DatasetManifest& m, int id);

// Trains on the non-test contexts of the dataset and writes history.csv,
// checkpoint/ and run.json into `run_dir`.
void train_run(RunConfig cfg, const fs::path& data_dir, const fs::path& run_dir,
               std::ostream& log);

// Evaluates a trained run on its test contexts and writes report, CDF and
// breakdown CSVs into `out_dir`.
eval::EvalReport eval_run(const fs::path& run_dir, const std::optional<fs::path>& data_dir,
                          const fs::path& out_dir, bool force, std::ostream& log);

// Reads report_<run>.csv from each run directory and writes comparison.csv.
std::vector<eval::ComparisonRow> compare_run_dirs(const std::vector<fs::path>& run_dirs,
                                                  const fs::path& out_dir, std::ostream& log);

// Correlation matrix and per-feature histograms of the training contexts.
void report_dataset(const fs::path& data_dir, const fs::path& out_dir, int bins,
                    std::ostream& log);

}  // namespace srfl::cli
