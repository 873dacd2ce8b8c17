#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "srfl/dataset.hpp"
#include "srfl/models.hpp"

namespace srfl::eval {

// One unmasked STA prediction on the test set.
struct TaggedError {
  int context_id = 0;
  int variation_id = 0;
  int tau = 0;
  int sta_index = 0;
  int n_aps = 0;
  int n_stas = 0;
  double predicted_mbps = 0.0;
  double label_mbps = 0.0;
  double error = 0.0;  // |predicted - label|

  bool same_key(const TaggedError& o) const {
    return context_id == o.context_id && variation_id == o.variation_id && tau == o.tau &&
           sta_index == o.sta_index;
  }
};

struct CdfPoint {
  double error = 0.0;
  double fraction = 0.0;
};

struct BreakdownRow {
  std::string group;  // "n_aps" or "n_stas"
  int value = 0;
  std::size_t count = 0;
  double mae = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct EvalReport {
  std::string run_id;
  std::string arch;
  double overall_mae = 0.0;
  std::vector<TaggedError> errors;
  std::vector<CdfPoint> cdf;
  std::vector<BreakdownRow> breakdown;
};

// Predicts every raw test context after normalizing it with `meta`, and
// collects denormalized absolute errors of existing STAs.
EvalReport evaluate(models::Model& model, std::span<const data::Context> raw_test,
                    const data::NormMeta& meta, const std::string& run_id);

// Builds the report statistics (MAE, CDF, breakdown) from raw errors.
EvalReport make_report(std::string run_id, std::string arch, std::vector<TaggedError> errors);

// Quantile with linear interpolation between closest ranks, q in [0, 1].
double quantile(std::vector<double> values, double q);

// F(e) = fraction of errors <= e at each grid point.
std::vector<CdfPoint> error_cdf(std::span<const double> errors, std::span<const double> grid);
// `points` uniform points from 0 to the 99.5th percentile error.
std::vector<double> default_cdf_grid(std::span<const double> errors, std::size_t points = 200);

std::vector<BreakdownRow> breakdown_by_size(std::span<const TaggedError> errors);

struct ComparisonRow {
  int rank = 0;  // 1 = lowest MAE
  std::string run_id;
  std::string arch;
  double mae = 0.0;
  double frac_below_10mbps = 0.0;
  std::size_t n_errors = 0;
};

// Reports must cover the same test predictions. Rows keep input order.
std::vector<ComparisonRow> compare_runs(std::span<const EvalReport> reports);

// Fraction of errors strictly below `limit` Mbps.
double fraction_below(std::span<const TaggedError> errors, double limit);

void write_report_csv(const std::string& path, const EvalReport& r, const std::string& comment = {});
void write_cdf_csv(const std::string& path, const EvalReport& r, const std::string& comment = {});
void write_breakdown_csv(const std::string& path, const EvalReport& r,
                         const std::string& comment = {});
void write_comparison_csv(const std::string& path, std::span<const ComparisonRow> rows,
                          const std::string& comment = {});
// Reloads a report written by write_report_csv and recomputes its statistics.
EvalReport read_report_csv(const std::string& path);

}  // namespace srfl::eval
