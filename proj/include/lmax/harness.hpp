#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmax/ensemble.hpp"
#include "lmax/normalize.hpp"

namespace lmax::harness {

enum class TaskKind {
  lambda_max,
  lambda_max_centered,
  esd_ks,
  diag_dev,
  cov_rate,
  truncation_report,
  moment_check,
};

struct TaskSpec {
  TaskKind kind = TaskKind::lambda_max;
  std::optional<CovarianceSpec> sigma;  // cov_rate
  int k = 0;                            // moment_check

  /// Column value in the results file, e.g. "cov_rate" or "moment_check_k3".
  std::string label() const;
};

struct ExperimentConfig {
  DistributionSpec distribution;
  std::vector<MatrixShape> grid;
  int replicates = 1;
  std::uint64_t master_seed = 0;
  std::vector<TaskSpec> tasks;
  std::filesystem::path output_dir = ".";

  /// Throws ValidationError: empty grid, duplicate shapes or task labels,
  /// replicates < 1, dense-only tasks beyond the dense limit, bad task
  /// parameters.
  void validate() const;
};

DistributionSpec distribution_from_json(const std::string& text);
std::string distribution_to_json(const DistributionSpec& spec);
CovarianceSpec covariance_from_json(const std::string& text,
                                    const std::filesystem::path& base_dir = {});
std::string covariance_to_json(const CovarianceSpec& sigma);
ExperimentConfig config_from_json(const std::string& text,
                                  const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct RunRecord {
  std::int64_t p = 0;
  std::int64_t n = 0;
  double ratio = 0.0;
  std::int64_t replicate = 0;
  std::string task;
  double value = 0.0;
  bool ok = true;
  std::string message;                // error text when !ok
  std::map<std::string, double> aux;  // sorted keys keep the CSV stable
  double wall_ms = 0.0;               // not part of the canonical CSV

  /// Sort key (p, n, replicate, task).
  bool operator<(const RunRecord& other) const;
};

/// Canonical column order of the results file.
inline constexpr const char* kRecordHeader = "p,n,ratio,replicate,task,value,status,message,aux";

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_records_csv(std::istream& in);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);

/// Runs every (shape, replicate, task) without touching the filesystem.
/// threads = 0 picks the hardware concurrency. Output is sorted and does not
/// depend on the thread count.
std::vector<RunRecord> execute_experiment(const ExperimentConfig& config, unsigned threads = 0);

/// execute_experiment, then writes results.csv (canonical) and timings.csv
/// under config.output_dir. Throws IoError when the directory is unusable.
std::vector<RunRecord> run_experiment(const ExperimentConfig& config, unsigned threads = 0);

}  // namespace lmax::harness
