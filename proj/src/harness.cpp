#include "lmax/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "lmax/errors.hpp"
#include "lmax/matrix_io.hpp"
#include "lmax/momentlab.hpp"
#include "lmax/spectral.hpp"

namespace lmax::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

const char* task_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::lambda_max: return "lambda_max";
    case TaskKind::lambda_max_centered: return "lambda_max_centered";
    case TaskKind::esd_ks: return "esd_ks";
    case TaskKind::diag_dev: return "diag_dev";
    case TaskKind::cov_rate: return "cov_rate";
    case TaskKind::truncation_report: return "truncation_report";
    case TaskKind::moment_check: return "moment_check";
  }
  return "?";
}

TaskKind task_from_name(const std::string& name) {
  for (auto kind : {TaskKind::lambda_max, TaskKind::lambda_max_centered, TaskKind::esd_ks,
                    TaskKind::diag_dev, TaskKind::cov_rate, TaskKind::truncation_report,
                    TaskKind::moment_check}) {
    if (name == task_name(kind)) return kind;
  }
  throw ValidationError("unknown task '" + name + "'");
}

bool needs_dense(TaskKind kind) {
  return kind == TaskKind::lambda_max_centered || kind == TaskKind::esd_ks ||
         kind == TaskKind::cov_rate;
}

template <typename Fn>
auto json_guard(Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

DistributionSpec distribution_from(const json& j) {
  const std::string kind = j.is_string() ? j.get<std::string>() : j.at("kind").get<std::string>();
  DistributionSpec spec;
  if (kind == "gaussian") {
    spec = DistributionSpec::gaussian();
  } else if (kind == "rademacher") {
    spec = DistributionSpec::rademacher();
  } else if (kind == "uniform-symmetric") {
    spec = DistributionSpec::uniform_symmetric();
  } else if (kind == "centered-exponential") {
    spec = DistributionSpec::centered_exponential();
  } else if (kind == "student-t") {
    spec = DistributionSpec::student_t(j.at("df").get<double>());
  } else if (kind == "two-point") {
    spec = DistributionSpec::two_point(j.value("a", 1.0), j.value("q", 0.5));
  } else {
    throw ValidationError("unknown distribution '" + kind + "'");
  }
  spec.validate();
  return spec;
}

CovarianceSpec covariance_from(const json& j, const std::filesystem::path& base_dir) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "identity") return CovarianceSpec::identity();
  if (kind == "diagonal") return CovarianceSpec::diagonal(j.at("d").get<std::vector<double>>());
  if (kind == "toeplitz") return CovarianceSpec::toeplitz(j.at("rho").get<double>());
  if (kind == "explicit") {
    std::filesystem::path path = j.at("path").get<std::string>();
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return CovarianceSpec::explicit_matrix(io::read_binary(path));
  }
  throw ValidationError("unknown covariance kind '" + kind + "'");
}

}  // namespace

std::string TaskSpec::label() const {
  if (kind == TaskKind::moment_check) return "moment_check_k" + std::to_string(k);
  return task_name(kind);
}

void ExperimentConfig::validate() const {
  distribution.validate();
  if (grid.empty()) throw ValidationError("experiment grid is empty");
  if (replicates < 1) throw ValidationError("replicates must be >= 1");
  std::set<MatrixShape> shapes;
  for (const auto& s : grid) {
    if (s.p < 1 || s.n < 1) throw ValidationError("grid shapes need p, n >= 1");
    if (!shapes.insert(s).second) {
      throw ValidationError("duplicate grid shape (" + std::to_string(s.p) + ", " +
                            std::to_string(s.n) + ")");
    }
  }
  std::set<std::string> labels;
  for (const auto& t : tasks) {
    if (!labels.insert(t.label()).second) throw ValidationError("duplicate task " + t.label());
    if (t.kind == TaskKind::cov_rate && !t.sigma) {
      throw ValidationError("cov_rate needs a covariance");
    }
    if (t.kind == TaskKind::moment_check && t.k < 1) {
      throw ValidationError("moment_check needs k >= 1");
    }
    if (needs_dense(t.kind)) {
      for (const auto& s : grid) {
        if (s.p > kDenseLimit) {
          throw ValidationError(t.label() + " is dense-only and p = " + std::to_string(s.p) +
                                " exceeds " + std::to_string(kDenseLimit));
        }
      }
    }
  }
}

DistributionSpec distribution_from_json(const std::string& text) {
  return json_guard([&] { return distribution_from(json::parse(text)); });
}

std::string distribution_to_json(const DistributionSpec& spec) {
  ordered_json j;
  j["kind"] = spec.name();
  if (spec.kind == DistributionKind::student_t) j["df"] = spec.df;
  if (spec.kind == DistributionKind::two_point) {
    j["a"] = spec.a;
    j["q"] = spec.q;
  }
  return j.dump();
}

CovarianceSpec covariance_from_json(const std::string& text, const std::filesystem::path& base) {
  return json_guard([&] { return covariance_from(json::parse(text), base); });
}

std::string covariance_to_json(const CovarianceSpec& sigma) {
  ordered_json j;
  j["kind"] = sigma.kind_name();
  if (const auto* d = std::get_if<CovarianceSpec::Diagonal>(&sigma.kind)) j["d"] = d->d;
  if (const auto* t = std::get_if<CovarianceSpec::Toeplitz>(&sigma.kind)) j["rho"] = t->rho;
  return j.dump();
}

ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base) {
  return json_guard([&] {
    const json j = json::parse(text);
    ExperimentConfig cfg;
    cfg.distribution = distribution_from(j.at("distribution"));
    for (const auto& s : j.at("grid")) {
      cfg.grid.emplace_back(s.at("p").get<std::int64_t>(), s.at("n").get<std::int64_t>());
    }
    cfg.replicates = j.value("replicates", 1);
    cfg.master_seed = j.value("master_seed", std::uint64_t{0});
    for (const auto& t : j.value("tasks", json::array())) {
      TaskSpec task;
      if (t.is_string()) {
        task.kind = task_from_name(t.get<std::string>());
      } else {
        task.kind = task_from_name(t.at("task").get<std::string>());
        if (t.contains("sigma")) task.sigma = covariance_from(t.at("sigma"), base);
        task.k = t.value("k", 0);
      }
      cfg.tasks.push_back(std::move(task));
    }
    if (j.contains("output_dir")) {
      cfg.output_dir = j.at("output_dir").get<std::string>();
    }
    cfg.validate();
    return cfg;
  });
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str(), path.parent_path());
}

bool RunRecord::operator<(const RunRecord& o) const {
  return std::tie(p, n, replicate, task) < std::tie(o.p, o.n, o.replicate, o.task);
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t u = 0; u < line.size(); ++u) {
    const char c = line[u];
    if (quoted) {
      if (c == '"' && u + 1 < line.size() && line[u + 1] == '"') {
        fields.back() += '"';
        ++u;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<RunRecord>& records) {
  out << kRecordHeader << '\n';
  for (const auto& r : records) {
    out << r.p << ',' << r.n << ',' << io::format_double(r.ratio) << ',' << r.replicate << ','
        << r.task << ',' << io::format_double(r.value) << ',' << (r.ok ? "ok" : "error") << ','
        << csv_quote(r.message) << ',';
    bool first = true;
    for (const auto& [key, v] : r.aux) {
      if (!first) out << ';';
      out << key << '=' << io::format_double(v);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing results CSV");
}

std::vector<RunRecord> read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kRecordHeader) {
    throw ValidationError("results CSV header does not match the expected columns");
  }
  std::vector<RunRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv_split(line);
    if (f.size() != 9) throw ValidationError("results CSV row has the wrong number of fields");
    RunRecord r;
    try {
      r.p = std::stoll(f[0]);
      r.n = std::stoll(f[1]);
      r.ratio = std::stod(f[2]);
      r.replicate = std::stoll(f[3]);
      r.task = f[4];
      r.value = std::strtod(f[5].c_str(), nullptr);
      r.ok = f[6] == "ok";
      r.message = f[7];
      std::stringstream aux(f[8]);
      std::string kv;
      while (std::getline(aux, kv, ';')) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ValidationError("bad aux entry '" + kv + "'");
        r.aux[kv.substr(0, eq)] = std::strtod(kv.c_str() + eq + 1, nullptr);
      }
    } catch (const std::logic_error&) {
      throw ValidationError("unparseable results CSV row: " + line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_records_csv(in);
}

namespace {

double lambda_max_dense(const Eigen::MatrixXd& M) {
  const Eigen::VectorXd e = eigvals_sym(M);
  return e(e.size() - 1);
}

double trace_power(const Eigen::MatrixXd& B, int k) {
  Eigen::MatrixXd P = B;
  for (int u = 1; u < k; ++u) P = P * B;
  return P.trace();
}

/// Exact E tr(B^k) per shape for the moment_check task, where affordable.
using ExactTable = std::map<std::pair<MatrixShape, int>, std::optional<double>>;

ExactTable exact_moments(const ExperimentConfig& cfg) {
  ExactTable table;
  for (const auto& t : cfg.tasks) {
    if (t.kind != TaskKind::moment_check) continue;
    const auto moments = moment_sequence(cfg.distribution, 2 * t.k);
    const bool finite = std::all_of(moments.begin(), moments.end(),
                                    [](double m) { return std::isfinite(m); });
    for (const auto& s : cfg.grid) {
      std::optional<double> exact;
      if (finite) {
        try {
          exact = momentlab::exact_trace_moment(s.p, s.n, t.k, moments);
        } catch (const ResourceError&) {
        }
      }
      table[{s, t.k}] = exact;
    }
  }
  return table;
}

void run_task(const TaskSpec& task, const DataMatrix& X, const ExactTable& exact,
              RunRecord& rec) {
  const MatrixShape& shape = X.shape();
  switch (task.kind) {
    case TaskKind::lambda_max: {
      if (shape.p <= kDenseLimit) {
        rec.value = lambda_max_dense(build_A(X));
        rec.aux["lambda_max_B"] = lambda_max_dense(build_B(X));
      } else {
        const auto r = lambda_max_matfree(X, 1e-10);
        rec.value = r.lambda_max;
        rec.aux["iterations"] = static_cast<double>(r.iterations);
      }
      break;
    }
    case TaskKind::lambda_max_centered:
      rec.value = lambda_max_dense(build_A1(X));
      rec.aux["lambda_max_A"] = lambda_max_dense(build_A(X));
      break;
    case TaskKind::esd_ks: {
      const Eigen::VectorXd e = eigvals_sym(build_A(X));
      rec.value = ks_distance(e);
      rec.aux["lambda_max"] = e(e.size() - 1);
      break;
    }
    case TaskKind::diag_dev:
      rec.value = diag_max_dev(X);
      break;
    case TaskKind::cov_rate: {
      const Eigen::MatrixXd Sigma = task.sigma->materialize(shape.p);
      const Eigen::MatrixXd S1 = build_S1(X);
      const Eigen::MatrixXd S2 = build_S2(X, *task.sigma);
      const double s1_dev =
          spectral_norm_sym(S1 - Eigen::MatrixXd::Identity(shape.p, shape.p));
      const double sigma_norm = spectral_norm_sym(Sigma);
      rec.value = spectral_norm_sym(S2 - Sigma);
      rec.aux["s1_dev"] = s1_dev;
      rec.aux["sigma_norm"] = sigma_norm;
      rec.aux["bound_slack"] = s1_dev * sigma_norm - rec.value;
      break;
    }
    case TaskKind::truncation_report: {
      NormalizationParams params;
      const auto [out, rep] = normalize_entries(X, params);
      rec.value = rep.fraction_truncated;
      rec.aux["threshold"] = rep.threshold;
      rec.aux["center"] = rep.center;
      rec.aux["sigma2"] = rep.sigma2;
      rec.aux["post_mean"] = rep.post_mean;
      rec.aux["post_sigma2"] = rep.post_sigma2;
      break;
    }
    case TaskKind::moment_check: {
      rec.value = trace_power(build_B(X), task.k);
      const auto it = exact.find({shape, task.k});
      if (it != exact.end() && it->second) rec.aux["exact"] = *it->second;
      break;
    }
  }
}

}  // namespace

std::vector<RunRecord> execute_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const ExactTable exact = exact_moments(config);
  const SeedSpec seed{config.master_seed};

  struct Job {
    MatrixShape shape;
    std::int64_t replicate;
  };
  std::vector<Job> jobs;
  for (const auto& s : config.grid) {
    for (int r = 0; r < config.replicates; ++r) jobs.push_back({s, r});
  }
  std::vector<std::vector<RunRecord>> results(jobs.size());

  auto run_job = [&](std::size_t idx) {
    const Job& job = jobs[idx];
    auto base = [&](const TaskSpec& t) {
      RunRecord rec;
      rec.p = job.shape.p;
      rec.n = job.shape.n;
      rec.ratio = job.shape.ratio();
      rec.replicate = job.replicate;
      rec.task = t.label();
      return rec;
    };
    std::optional<DataMatrix> X;
    std::string sample_error;
    try {
      X = sample_matrix(config.distribution, job.shape, seed, job.replicate);
    } catch (const std::exception& e) {
      sample_error = e.what();
    }
    for (const auto& task : config.tasks) {
      RunRecord rec = base(task);
      const auto start = std::chrono::steady_clock::now();
      try {
        if (!X) throw std::runtime_error("sampling failed: " + sample_error);
        run_task(task, *X, exact, rec);
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.value = std::nan("");
        rec.aux.clear();
        rec.message = e.what();
      }
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start)
                        .count();
      results[idx].push_back(std::move(rec));
    }
  };

  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(jobs.size(), 1)));
  if (workers <= 1) {
    for (std::size_t idx = 0; idx < jobs.size(); ++idx) run_job(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t idx = next++; idx < jobs.size(); idx = next++) run_job(idx);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<RunRecord> records;
  for (auto& r : results) {
    for (auto& rec : r) records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end());
  return records;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  std::error_code ec;
  std::filesystem::create_directories(config.output_dir, ec);
  const auto results_path = config.output_dir / "results.csv";
  std::ofstream probe(results_path);
  if (ec || !probe) {
    throw IoError("output directory " + config.output_dir.string() + " is not writable");
  }

  auto records = execute_experiment(config, threads);
  write_records_csv(probe, records);
  probe.close();
  if (!probe) throw IoError("failed writing " + results_path.string());

  std::ofstream timings(config.output_dir / "timings.csv");
  if (!timings) throw IoError("cannot write timings.csv");
  timings << "p,n,replicate,task,wall_ms\n";
  for (const auto& r : records) {
    timings << r.p << ',' << r.n << ',' << r.replicate << ',' << r.task << ','
            << io::format_double(r.wall_ms) << '\n';
  }
  return records;
}

}  // namespace lmax::harness
