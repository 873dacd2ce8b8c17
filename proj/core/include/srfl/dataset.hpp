#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "srfl/rf_oracle.hpp"
#include "srfl/scenario.hpp"

namespace srfl::data {

// One (tau, STA slot) observation of BSS_A. Slots beyond the context's STA
// count are padding rows with mask = 0 and zeroed per-STA fields.
struct FeatureRow {
  int context_id = 0;
  int variation_id = 0;
  int tau = scenario::kObssPdMin;
  // tau as a model feature: equal to `tau` in raw rows, min-max scaled in
  // normalized rows. `tau` itself always stays the integer dBm key.
  double tau_feature = scenario::kObssPdMin;
  int sta_index = 0;
  int mask = 1;
  double rssi = 0.0;
  double sinr = 0.0;
  double dist_sta_ap = 0.0;
  double n_stas = 0.0;
  double n_interfering_aps = 0.0;
  // Power sensed at BSS_A's AP from each other AP in BSS order, zero padded to
  // the configured maximum AP count.
  std::vector<double> interference;
  double throughput = 0.0;

  bool operator==(const FeatureRow&) const = default;
};

struct ContextDataset {
  int context_id = 0;
  int n_stas = 0;  // s_k
  int max_aps = 6;  // a
  int max_stas = 4;  // b
  bool normalized = false;
  std::vector<FeatureRow> rows;

  // Number of unmasked rows, i.e. N^(k).
  std::size_t n_samples() const;
  int n_aps() const;
  int n_variations() const;
  std::vector<int> taus() const;

  bool operator==(const ContextDataset&) const = default;
};

// A context bundles its feature table with the deployments it was built from.
struct Context {
  ContextDataset data;
  scenario::ProfileKind profile = scenario::ProfileKind::kTraining1;
  std::vector<scenario::Deployment> deployments;  // one per location variation
};

// Rows for one evaluated deployment (fixed tau): exactly `max_stas` rows.
std::vector<FeatureRow> extract_features(const scenario::Deployment& d,
                                         const oracle::LinkMetrics& m, int max_aps,
                                         int max_stas, int context_id);

// Runs the threshold sweep and the label oracle for every variation and
// assembles the context table. `taus` defaults to the full -82..-62 sweep.
Context build_context(int context_id, scenario::ProfileKind profile,
                      std::vector<scenario::Deployment> variations,
                      const oracle::RadioParams& params, int max_aps, int max_stas,
                      std::vector<int> taus = {});

enum class Feature : std::size_t {
  kTau,
  kRssi,
  kSinr,
  kDistStaAp,
  kNStas,
  kNInterferingAps,
  kInterference,
  kThroughput,
  kCount
};
inline constexpr std::size_t kFeatureCount = static_cast<std::size_t>(Feature::kCount);

struct Range {
  double min = 0.0;
  double max = 0.0;

  double apply(double x) const noexcept { return max > min ? (x - min) / (max - min) : 0.0; }
  double invert(double x) const noexcept { return max > min ? min + x * (max - min) : min; }
  bool operator==(const Range&) const = default;
};

struct NormMeta {
  std::array<Range, kFeatureCount> ranges{};

  const Range& operator[](Feature f) const { return ranges[static_cast<std::size_t>(f)]; }
  Range& operator[](Feature f) { return ranges[static_cast<std::size_t>(f)]; }
  double denormalize_label(double y) const { return (*this)[Feature::kThroughput].invert(y); }
  bool operator==(const NormMeta&) const = default;
};

std::string_view feature_name(Feature f);

// Per-feature (min, max) over unmasked rows and non-padded interference slots.
NormMeta fit_normalizer(std::span<const ContextDataset> pool);
ContextDataset normalize(const ContextDataset& ds, const NormMeta& meta);
ContextDataset denormalize(const ContextDataset& ds, const NormMeta& meta);

struct Normalized {
  std::vector<ContextDataset> datasets;
  NormMeta meta;
};
Normalized min_max_normalize(std::span<const ContextDataset> pool);

struct GridOptions {
  int width = 100;
  int height = 100;
  double cell_size_m = 0.8;
};

// Row-major W x H single-channel image.
struct GridImage {
  int width = 0;
  int height = 0;
  double cell_size_m = 0.0;
  std::vector<double> data;

  double at(int col, int row) const {
    return data[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(col)];
  }
  bool operator==(const GridImage&) const = default;
};

// Role-coded cell value for BSS_A's AP.
double encode_tau(int tau) noexcept;

GridImage encode_grid_image(const scenario::Deployment& d, int tau,
                            const GridOptions& opts = {});
void write_grid_csv(const GridImage& img, const std::filesystem::path& path);
GridImage read_grid_csv(const std::filesystem::path& path, const GridOptions& opts = {});

// Column-oriented view of pooled rows (unmasked only) for analysis.
struct FeatureTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};
FeatureTable feature_table(std::span<const ContextDataset> pool);

// Pearson correlation between columns. Zero-variance columns correlate 0 with
// everything except themselves.
std::vector<std::vector<double>> correlation_matrix(const std::vector<std::vector<double>>& columns);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};
Histogram histogram(std::span<const double> values, int bins);

struct SplitFractions {
  double train = 0.8;
  double val1 = 0.1;
  double val2 = 0.1;
};

struct Split {
  std::vector<int> train;
  std::vector<int> val1;
  std::vector<int> val2;
};

// Deterministic shuffle, then val1 and val2 take round(fraction * n) ids each
// and the remainder trains. A split with a positive fraction must be non-empty.
Split split_contexts(std::span<const int> context_ids, const SplitFractions& fractions,
                     std::uint64_t seed);

std::vector<std::string> context_csv_header(int max_aps);
void write_context_csv(const ContextDataset& ds, const std::filesystem::path& path,
                       const std::string& comment = {});
ContextDataset read_context_csv(const std::filesystem::path& path, int max_stas = 4);

}  // namespace srfl::data
