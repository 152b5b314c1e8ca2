#include "lmax/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "lmax/errors.hpp"
#include "lmax/matrix_io.hpp"
#include "lmax/numeric.hpp"

namespace lmax::harness {

double lower_median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  const std::size_t mid = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  return values[mid];
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw ValidationError("nothing to summarize");
  std::map<std::tuple<std::int64_t, std::int64_t, std::string>, std::vector<double>> groups;
  std::map<std::tuple<std::int64_t, std::int64_t, std::string>, double> ratios;
  for (const auto& r : records) {
    if (!r.ok) continue;
    const auto key = std::make_tuple(r.p, r.n, r.task);
    groups[key].push_back(r.value);
    ratios[key] = r.ratio;
  }
  std::vector<SummaryRow> out;
  for (const auto& [key, values] : groups) {
    SummaryRow row;
    std::tie(row.p, row.n, row.task) = key;
    row.ratio = ratios[key];
    row.count = values.size();
    row.median = lower_median(values);
    CompensatedSum s;
    for (double v : values) s += v;
    row.mean = s.value() / static_cast<double>(values.size());
    if (values.size() > 1) {
      CompensatedSum q;
      for (double v : values) q += (v - row.mean) * (v - row.mean);
      row.sd = std::sqrt(q.value() / static_cast<double>(values.size() - 1));
    }
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    row.min = *lo;
    row.max = *hi;
    out.push_back(std::move(row));
  }
  return out;
}

RateFit fit_rate(const std::vector<RunRecord>& records, const std::string& task) {
  std::map<std::pair<std::int64_t, std::int64_t>, std::vector<double>> groups;
  std::map<std::pair<std::int64_t, std::int64_t>, double> ratio;
  for (const auto& r : records) {
    if (!r.ok || r.task != task) continue;
    groups[{r.p, r.n}].push_back(r.value);
    ratio[{r.p, r.n}] = r.ratio;
  }
  std::set<double> distinct;
  for (const auto& [key, v] : ratio) distinct.insert(v);
  if (distinct.size() < 3) {
    throw ValidationError("rate fit needs at least 3 distinct ratios, got " +
                          std::to_string(distinct.size()));
  }

  RateFit fit;
  for (const auto& [key, values] : groups) {
    const double med = lower_median(values);
    if (!(med > 0.0)) throw ValidationError("rate fit needs positive errors");
    fit.points.emplace_back(std::log(ratio[key]), std::log(med));
  }
  std::sort(fit.points.begin(), fit.points.end());

  const double m = static_cast<double>(fit.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : fit.points) {
    mx += x;
    my += y;
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [x, y] : fit.points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [x, y] : fit.points) {
    const double e = y - (fit.intercept + fit.slope * x);
    ss_res += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (phat + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::vector<TailRow> tail_frequency(const std::vector<RunRecord>& records, double eps) {
  std::map<std::pair<std::int64_t, std::int64_t>, TailRow> rows;
  for (const auto& r : records) {
    if (!r.ok || r.task != "lambda_max") continue;
    const auto it = r.aux.find("lambda_max_B");
    if (it == r.aux.end()) continue;
    TailRow& row = rows[{r.p, r.n}];
    row.p = r.p;
    row.n = r.n;
    row.ratio = r.ratio;
    ++row.replicates;
    if (it->second > 1.0 + eps) ++row.exceed;
  }
  std::vector<TailRow> out;
  for (auto& [key, row] : rows) {
    row.frequency = static_cast<double>(row.exceed) / static_cast<double>(row.replicates);
    std::tie(row.wilson_lo, row.wilson_hi) = wilson_interval(row.exceed, row.replicates);
    out.push_back(row);
  }
  return out;
}

ReportFormat parse_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  if (name == "svg") return ReportFormat::svg;
  throw ValidationError("unknown report format '" + name + "' (expected csv, json or svg)");
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "p,n,ratio,task,count,median,mean,sd,min,max\n";
  for (const auto& r : rows) {
    out << r.p << ',' << r.n << ',' << io::format_double(r.ratio) << ',' << r.task << ','
        << r.count << ',' << io::format_double(r.median) << ',' << io::format_double(r.mean)
        << ',' << io::format_double(r.sd) << ',' << io::format_double(r.min) << ','
        << io::format_double(r.max) << '\n';
  }
}

std::string render_json(const std::vector<RunRecord>& records) {
  using nlohmann::ordered_json;
  ordered_json j;
  ordered_json recs = ordered_json::array();
  for (const auto& r : records) {
    ordered_json o;
    o["p"] = r.p;
    o["n"] = r.n;
    o["ratio"] = r.ratio;
    o["replicate"] = r.replicate;
    o["task"] = r.task;
    o["status"] = r.ok ? "ok" : "error";
    if (r.ok) o["value"] = r.value;
    if (!r.ok) o["message"] = r.message;
    o["aux"] = ordered_json(r.aux);
    recs.push_back(std::move(o));
  }
  j["records"] = std::move(recs);

  ordered_json summary = ordered_json::array();
  const bool any_ok = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.ok; });
  if (any_ok) {
    for (const auto& s : summarize(records)) {
      summary.push_back({{"p", s.p},         {"n", s.n},       {"ratio", s.ratio},
                         {"task", s.task},   {"count", s.count}, {"median", s.median},
                         {"mean", s.mean},   {"sd", s.sd},     {"min", s.min},
                         {"max", s.max}});
    }
  }
  j["summary"] = std::move(summary);

  try {
    const RateFit fit = fit_rate(records);
    j["rate_fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}};
  } catch (const ValidationError&) {
  }
  ordered_json tail = ordered_json::array();
  for (const auto& t : tail_frequency(records)) {
    tail.push_back({{"p", t.p},
                    {"n", t.n},
                    {"ratio", t.ratio},
                    {"replicates", t.replicates},
                    {"exceed", t.exceed},
                    {"frequency", t.frequency},
                    {"wilson_lo", t.wilson_lo},
                    {"wilson_hi", t.wilson_hi}});
  }
  j["tail_lambda_max_B_eps_0.3"] = std::move(tail);
  return j.dump(2);
}

namespace {

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string short_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

std::string render_svg(const std::vector<RunRecord>& records) {
  constexpr double kWidth = 800, kHeight = 600;
  constexpr double kLeft = 80, kRight = 160, kTop = 50, kBottom = 70;

  // task -> points (log10 ratio, median, ratio)
  std::map<std::string, std::vector<std::tuple<double, double, double>>> series;
  if (std::any_of(records.begin(), records.end(), [](const auto& r) { return r.ok; })) {
    for (const auto& s : summarize(records)) {
      series[s.task].emplace_back(std::log10(s.ratio), s.median, s.ratio);
    }
  }
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (auto& [task, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, y, r] : pts) {
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf"};
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
       "viewBox=\"0 0 800 600\">\n"
    << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n"
    << "<text x=\"400\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"16\">median statistic vs p/n</text>\n";
  // axes
  o << "<line class=\"axis\" x1=\"" << fixed3(kLeft) << "\" y1=\"" << fixed3(kTop + ph) << "\" x2=\""
    << fixed3(kLeft + pw) << "\" y2=\"" << fixed3(kTop + ph) << "\" stroke=\"black\"/>\n";
  o << "<line class=\"axis\" x1=\"" << fixed3(kLeft) << "\" y1=\"" << fixed3(kTop) << "\" x2=\""
    << fixed3(kLeft) << "\" y2=\"" << fixed3(kTop + ph) << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << fixed3(kLeft + pw / 2) << "\" y=\"" << fixed3(kHeight - 20)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">log10(p/n)</text>\n";
  for (double x : {xmin, xmax}) {
    o << "<text x=\"" << fixed3(sx(x)) << "\" y=\"" << fixed3(kTop + ph + 20)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << short_num(x)
      << "</text>\n";
  }
  for (double y : {ymin, ymax}) {
    o << "<text x=\"" << fixed3(kLeft - 8) << "\" y=\"" << fixed3(sy(y) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << short_num(y)
      << "</text>\n";
  }

  std::size_t color = 0;
  for (const auto& [task, pts] : series) {
    const char* c = palette[color++ % (sizeof(palette) / sizeof(*palette))];
    o << "<g class=\"series\" data-task=\"" << task << "\">\n";
    o << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
    for (std::size_t u = 0; u < pts.size(); ++u) {
      if (u) o << ' ';
      o << fixed3(sx(std::get<0>(pts[u]))) << ',' << fixed3(sy(std::get<1>(pts[u])));
    }
    o << "\"/>\n";
    for (const auto& [x, y, r] : pts) {
      o << "<circle class=\"pt\" data-task=\"" << task << "\" data-ratio=\"" << io::format_double(r)
        << "\" data-value=\"" << io::format_double(y) << "\" cx=\"" << fixed3(sx(x))
        << "\" cy=\"" << fixed3(sy(y)) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    o << "</g>\n";
    const double ly = kTop + 18.0 * static_cast<double>(color - 1);
    o << "<text x=\"" << fixed3(kLeft + pw + 12) << "\" y=\"" << fixed3(ly + 4)
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << c << "\">" << task
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::vector<std::filesystem::path> emit_report(const std::vector<RunRecord>& records,
                                               ReportFormat format,
                                               const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string());

  auto open = [](const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
  };
  std::vector<std::filesystem::path> written;
  switch (format) {
    case ReportFormat::csv: {
      const auto results = out_dir / "results.csv";
      auto out = open(results);
      write_records_csv(out, records);
      written.push_back(results);
      const auto summary = out_dir / "summary.csv";
      auto sout = open(summary);
      if (std::any_of(records.begin(), records.end(), [](const auto& r) { return r.ok; })) {
        write_summary_csv(sout, summarize(records));
      } else {
        write_summary_csv(sout, {});
      }
      written.push_back(summary);
      break;
    }
    case ReportFormat::json: {
      const auto path = out_dir / "report.json";
      auto out = open(path);
      out << render_json(records) << '\n';
      written.push_back(path);
      break;
    }
    case ReportFormat::svg: {
      const auto path = out_dir / "plot.svg";
      auto out = open(path);
      out << render_svg(records);
      written.push_back(path);
      break;
    }
  }
  return written;
}

}  // namespace lmax::harness
