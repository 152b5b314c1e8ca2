#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lmax/harness.hpp"

namespace lmax::harness {

struct SummaryRow {
  std::int64_t p = 0;
  std::int64_t n = 0;
  double ratio = 0.0;
  std::string task;
  std::size_t count = 0;
  double median = 0.0;  // lower median for even counts
  double mean = 0.0;
  double sd = 0.0;      // sample standard deviation, 0 for one value
  double min = 0.0;
  double max = 0.0;
};

/// Per-(p, n, task) statistics over successful records, sorted by key.
/// Throws ValidationError on an empty input.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

/// Lower median of a nonempty sample.
double lower_median(std::vector<double> values);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::vector<std::pair<double, double>> points;  // (log ratio, log median error)
};

/// Least-squares fit of log(median value) on log(p/n) over the records of
/// `task`. Needs at least three distinct ratios.
RateFit fit_rate(const std::vector<RunRecord>& records, const std::string& task = "cov_rate");

struct TailRow {
  std::int64_t p = 0;
  std::int64_t n = 0;
  double ratio = 0.0;
  std::size_t replicates = 0;
  std::size_t exceed = 0;
  double frequency = 0.0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
};

/// 95% Wilson score interval for k successes out of n.
std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials,
                                          double z = 1.959963984540054);

/// Frequency of lambda_max(B_p) > 1 + eps per shape, read from the aux field
/// "lambda_max_B" of lambda_max records.
std::vector<TailRow> tail_frequency(const std::vector<RunRecord>& records, double eps = 0.3);

enum class ReportFormat { csv, json, svg };

/// Throws ValidationError for anything but csv, json or svg.
ReportFormat parse_format(const std::string& name);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);
std::string render_json(const std::vector<RunRecord>& records);

/// Median statistic against log10(p/n), one series per task, on a fixed
/// 800x600 canvas. Every point carries data-ratio / data-value attributes.
std::string render_svg(const std::vector<RunRecord>& records);

/// Writes results.csv + summary.csv, report.json or plot.svg into out_dir
/// and returns the paths written.
std::vector<std::filesystem::path> emit_report(const std::vector<RunRecord>& records,
                                               ReportFormat format,
                                               const std::filesystem::path& out_dir);

}  // namespace lmax::harness
