// lmax: command-line front end for the lmax library.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lmax/ensemble.hpp"
#include "lmax/errors.hpp"
#include "lmax/harness.hpp"
#include "lmax/matrix_io.hpp"
#include "lmax/momentlab.hpp"
#include "lmax/normalize.hpp"
#include "lmax/report.hpp"
#include "lmax/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kOutEnv = "LMAX_OUT_DIR";

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::string out;
  std::string format = "csv";
};

struct Source {
  std::string input;
  std::string dist = "gaussian";
  double df = 5.0;
  double a = 1.0;
  double q = 0.5;
  std::int64_t p = 0;
  std::int64_t n = 0;
  std::int64_t replicate = 0;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--threads", c.threads, "worker threads (0 = auto)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--format", c.format, "csv, json or svg")
      ->check(CLI::IsMember({"csv", "json", "svg"}));
}

void add_source(CLI::App* app, Source& s) {
  app->add_option("--input", s.input, "binary matrix file written by `gen`");
  app->add_option("--dist", s.dist, "entry distribution");
  app->add_option("--df", s.df, "student-t degrees of freedom");
  app->add_option("--a", s.a, "two-point atom");
  app->add_option("--q", s.q, "two-point probability of +a");
  app->add_option("-p,--p", s.p, "rows");
  app->add_option("-n,--n", s.n, "columns");
  app->add_option("--replicate", s.replicate, "replicate index");
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return ".";
}

fs::path prepare(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw lmax::IoError("cannot create " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw lmax::IoError("cannot write " + path.string());
  return out;
}

lmax::DistributionSpec make_dist(const Source& s) {
  ordered_json j{{"kind", s.dist}, {"df", s.df}, {"a", s.a}, {"q", s.q}};
  return lmax::harness::distribution_from_json(j.dump());
}

lmax::DataMatrix load_source(const Source& s, const Common& c) {
  if (!s.input.empty()) {
    if (!fs::exists(s.input)) throw lmax::IoError("no such file " + s.input);
    return lmax::io::read_data_matrix(s.input);
  }
  if (s.p < 1 || s.n < 1) throw lmax::ValidationError("need --input or positive --p and --n");
  return lmax::sample_matrix(make_dist(s), lmax::MatrixShape(s.p, s.n), lmax::SeedSpec{c.seed},
                             s.replicate);
}

std::string read_text(const std::string& arg) {
  if (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) return arg;
  std::ifstream in(arg);
  if (!in) throw lmax::IoError("cannot open " + arg);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Largest eigenvalue of normalized sample covariance matrices"};
  app.require_subcommand(1);
  Common common;
  Source source;

  // gen
  auto* gen = app.add_subcommand("gen", "sample a data matrix and write it to disk");
  add_common(gen, common);
  add_source(gen, source);
  std::string gen_name = "matrix";
  gen->add_option("--name", gen_name, "file stem");

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "largest eigenvalue of A_p for one matrix");
  add_common(spectrum, common);
  add_source(spectrum, source);
  std::string method = "auto";
  double tol = 1e-10;
  long max_iter = 20000;
  spectrum->add_option("--method", method, "dense, matfree or auto")
      ->check(CLI::IsMember({"auto", "dense", "matfree"}));
  spectrum->add_option("--tol", tol, "matrix-free tolerance");
  spectrum->add_option("--max-iter", max_iter, "matrix-free product budget");
  bool normalize_first = false;
  spectrum->add_flag("--normalize", normalize_first, "truncate, recenter and rescale first");

  // esd
  auto* esd_cmd = app.add_subcommand("esd", "eigenvalues of A_p and KS distance to the semicircle");
  add_common(esd_cmd, common);
  add_source(esd_cmd, source);

  // covtest
  auto* covtest = app.add_subcommand("covtest", "operator-norm error of S2 against Sigma");
  add_common(covtest, common);
  add_source(covtest, source);
  std::string sigma_arg = R"({"kind":"identity"})";
  covtest->add_option("--sigma", sigma_arg, "covariance as JSON text or a JSON file");

  // moments
  auto* moments = app.add_subcommand("moments", "combinatorial moment oracles");
  moments->require_subcommand(1);
  auto* classify = moments->add_subcommand("classify", "label the edges of one index circuit");
  add_common(classify, common);
  std::string circuit_arg;
  classify->add_option("--circuit", circuit_arg, "circuit JSON text or file")->required();

  auto* exact = moments->add_subcommand("exact", "E tr(B_p^k) by enumeration");
  add_common(exact, common);
  Source msrc;
  int k = 2;
  exact->add_option("--dist", msrc.dist, "entry distribution");
  exact->add_option("--df", msrc.df, "student-t degrees of freedom");
  exact->add_option("--a", msrc.a, "two-point atom");
  exact->add_option("--q", msrc.q, "two-point probability of +a");
  exact->add_option("-p,--p", msrc.p)->required();
  exact->add_option("-n,--n", msrc.n)->required();
  exact->add_option("-k,--k", k)->required();

  auto* bound = moments->add_subcommand("bound", "upper bound on E tr(B_p^k), optionally vs exact");
  add_common(bound, common);
  double delta = 1.0;
  bool with_exact = false;
  bound->add_option("--dist", msrc.dist, "entry distribution for the exact column");
  bound->add_option("-p,--p", msrc.p)->required();
  bound->add_option("-n,--n", msrc.n)->required();
  bound->add_option("-k,--k", k)->required();
  bound->add_option("--delta", delta)->required();
  bound->add_flag("--exact", with_exact, "add the enumerated value when affordable");

  auto* schedule = moments->add_subcommand("schedule", "check the moment-order schedule");
  add_common(schedule, common);
  double sp = 0, sn = 0, c1 = 1.0;
  schedule->add_option("-p,--p", sp)->required();
  schedule->add_option("-n,--n", sn)->required();
  schedule->add_option("--delta", delta)->required();
  schedule->add_option("--C1", c1);

  auto* canonical = moments->add_subcommand("canonical", "list canonical W-graph circuits");
  add_common(canonical, common);
  int p_cap = 3, n_cap = 3;
  bool no_star = false;
  canonical->add_option("-k,--k", k)->required();
  canonical->add_option("--p-cap", p_cap);
  canonical->add_option("--n-cap", n_cap);
  canonical->add_flag("--no-star", no_star, "drop the adjacent-distinct constraint");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run an experiment config");
  add_common(sweep, common);
  sweep->get_option("--config")->required();

  // report
  auto* report = app.add_subcommand("report", "summaries, rate fit and plot from results.csv");
  add_common(report, common);
  std::string results_path;
  report->add_option("--input", results_path, "results.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const auto X = load_source(source, common);
      const fs::path dir = prepare(out_dir(common));
      const fs::path bin = dir / (gen_name + ".bin");
      lmax::io::write_binary(bin, X.entries());
      std::cout << bin.string() << '\n';
      if (common.format == "csv") {
        const fs::path csv = dir / (gen_name + ".csv");
        lmax::io::write_csv(csv, X.entries());
        std::cout << csv.string() << '\n';
      }
    } else if (*spectrum) {
      auto X = load_source(source, common);
      if (normalize_first) {
        std::optional<lmax::DistributionSpec> spec;
        if (source.input.empty()) spec = make_dist(source);
        X = lmax::normalize_entries(X, {}, spec).first;
      }
      lmax::SpectralMethod m = lmax::SpectralMethod::dense;
      if (method == "matfree" || (method == "auto" && X.p() > lmax::kDenseLimit)) {
        m = lmax::SpectralMethod::matfree;
      }
      const auto s = lmax::summarize_spectrum(X, m, tol, max_iter);
      const fs::path dir = prepare(out_dir(common));
      write_text(dir / "spectrum.json", lmax::to_json(s));
      if (m == lmax::SpectralMethod::dense && common.format == "csv") {
        auto out = open_out(dir / "spectrum.csv");
        lmax::write_spectrum_csv(out, s.eigenvalues);
      }
      std::cout << lmax::io::format_double(s.lambda_max) << '\n';
    } else if (*esd_cmd) {
      const auto X = load_source(source, common);
      const auto s = lmax::summarize_spectrum(X, lmax::SpectralMethod::dense);
      const fs::path dir = prepare(out_dir(common));
      auto out = open_out(dir / "eigenvalues.csv");
      lmax::write_spectrum_csv(out, s.eigenvalues);
      write_text(dir / "esd.json", lmax::to_json(s));
      std::cout << "ks " << lmax::io::format_double(*s.ks_to_semicircle) << '\n';
    } else if (*covtest) {
      const auto X = load_source(source, common);
      const auto sigma = lmax::harness::covariance_from_json(
          read_text(sigma_arg), fs::path(sigma_arg).parent_path());
      const Eigen::MatrixXd Sigma = sigma.materialize(X.p());
      const Eigen::MatrixXd S1 = lmax::build_S1(X);
      const Eigen::MatrixXd S2 = lmax::build_S2(X, sigma);
      const Eigen::Index p = X.p();
      ordered_json j;
      j["p"] = X.p();
      j["n"] = X.n();
      j["sigma"] = nlohmann::json::parse(lmax::harness::covariance_to_json(sigma));
      j["error"] = lmax::spectral_norm_sym(S2 - Sigma);
      j["s1_dev"] = lmax::spectral_norm_sym(S1 - Eigen::MatrixXd::Identity(p, p));
      j["sigma_norm"] = lmax::spectral_norm_sym(Sigma);
      j["scaled_error"] = j["error"].get<double>() * std::sqrt(double(X.n()) / double(X.p()));
      const fs::path dir = prepare(out_dir(common));
      write_text(dir / "covtest.json", j.dump(2));
      std::cout << j.dump(2) << '\n';
    } else if (*classify) {
      const auto c = lmax::momentlab::circuit_from_json(read_text(circuit_arg));
      const auto cls = lmax::momentlab::classify(c);
      std::cout << lmax::momentlab::classification_to_json(c, cls) << '\n';
    } else if (*exact) {
      const auto spec = make_dist(msrc);
      const auto mom = lmax::moment_sequence(spec, 2 * k);
      ordered_json j{{"p", msrc.p}, {"n", msrc.n}, {"k", k}, {"distribution", spec.name()}};
      j["value"] = lmax::momentlab::exact_trace_moment(msrc.p, msrc.n, k, mom);
      if (const auto sum = lmax::momentlab::trace_moment_sum_integer(msrc.p, msrc.n, k, mom)) {
        j["integer_sum"] = *sum;
      }
      std::cout << j.dump(2) << '\n';
    } else if (*bound) {
      lmax::momentlab::BoundRow row;
      row.p = msrc.p;
      row.n = msrc.n;
      row.k = k;
      row.delta = delta;
      row.bound = lmax::momentlab::bound_rhs_a13(double(msrc.p), double(msrc.n), k, delta);
      if (with_exact) {
        const auto mom = lmax::moment_sequence(make_dist(msrc), 2 * k);
        row.exact = lmax::momentlab::exact_trace_moment(msrc.p, msrc.n, k, mom);
      }
      if (common.format == "json") {
        ordered_json j{{"p", row.p}, {"n", row.n}, {"k", row.k}, {"delta", row.delta},
                       {"bound", row.bound}};
        if (row.exact) j["exact"] = *row.exact;
        std::cout << j.dump(2) << '\n';
      } else {
        lmax::momentlab::write_bound_table(std::cout, std::span(&row, 1));
      }
    } else if (*schedule) {
      const auto rep = lmax::momentlab::check_schedule(sp, sn, delta, c1);
      std::cout << lmax::momentlab::schedule_to_json(rep) << '\n';
    } else if (*canonical) {
      ordered_json arr = ordered_json::array();
      lmax::momentlab::for_each_canonical(k, p_cap, n_cap, !no_star, [&](const auto& c) {
        arr.push_back(ordered_json::parse(lmax::momentlab::circuit_to_json(c)));
      });
      std::cout << arr.dump(2) << '\n';
    } else if (*sweep) {
      auto cfg = lmax::harness::load_config(common.config);
      if (sweep->count("--seed")) cfg.master_seed = common.seed;
      if (!common.out.empty()) {
        cfg.output_dir = common.out;
      } else if (const char* env = std::getenv(kOutEnv); env && *env) {
        cfg.output_dir = env;
      }
      const auto records = lmax::harness::run_experiment(cfg, common.threads);
      std::size_t failed = 0;
      for (const auto& r : records) failed += r.ok ? 0 : 1;
      std::cout << records.size() << " records, " << failed << " failed, written to "
                << (cfg.output_dir / "results.csv").string() << '\n';
    } else if (*report) {
      if (!fs::exists(results_path)) throw lmax::IoError("no such file " + results_path);
      const auto records = lmax::harness::read_records_csv(fs::path(results_path));
      const auto format = lmax::harness::parse_format(common.format);
      for (const auto& path : lmax::harness::emit_report(records, format, out_dir(common))) {
        std::cout << path.string() << '\n';
      }
    }
  } catch (const lmax::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const lmax::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (best " << e.best_value() << " after "
              << e.iterations() << ")\n";
    return 2;
  } catch (const lmax::ResourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const lmax::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
