#include "lmax/momentlab.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "lmax/errors.hpp"
#include "lmax/matrix_io.hpp"
#include "lmax/numeric.hpp"

namespace lmax::momentlab {

using nlohmann::ordered_json;

void IndexCircuit::validate() const {
  if (k < 1) throw ValidationError("circuit needs k >= 1");
  if (static_cast<int>(i.size()) != k || static_cast<int>(j.size()) != k) {
    throw ValidationError("circuit index sequences must both have length k");
  }
  for (int a = 0; a < k; ++a) {
    if (i[a] < 1 || j[a] < 1) throw ValidationError("circuit indices are 1-based");
  }
  if (star && !satisfies_star()) {
    throw ValidationError("circuit violates i_a != i_{a+1} under the star constraint");
  }
}

bool IndexCircuit::satisfies_star() const {
  for (int a = 0; a < k; ++a) {
    if (i[a] == i[(a + 1) % k]) return false;
  }
  return true;
}

const char* label_name(EdgeLabel label) {
  switch (label) {
    case EdgeLabel::column_innovation_t11: return "column-innovation-T11";
    case EdgeLabel::column_innovation_t12: return "column-innovation-T12";
    case EdgeLabel::row_innovation: return "row-innovation";
    case EdgeLabel::t3_regular: return "T3-regular";
    case EdgeLabel::t3_irregular: return "T3-irregular";
    case EdgeLabel::t21: return "T21";
    case EdgeLabel::t22: return "T22";
    case EdgeLabel::t4_other: return "T4-other";
  }
  return "?";
}

bool is_innovation(EdgeLabel label) {
  return label == EdgeLabel::column_innovation_t11 || label == EdgeLabel::column_innovation_t12 ||
         label == EdgeLabel::row_innovation;
}

bool is_t3(EdgeLabel label) {
  return label == EdgeLabel::t3_regular || label == EdgeLabel::t3_irregular;
}

bool is_t4(EdgeLabel label) {
  return label == EdgeLabel::t21 || label == EdgeLabel::t22 || label == EdgeLabel::t4_other;
}

std::vector<Edge> edges_of(const IndexCircuit& c) {
  std::vector<Edge> e;
  e.reserve(2 * static_cast<std::size_t>(c.k));
  for (int a = 0; a < c.k; ++a) {
    e.push_back({c.i[a], c.j[a], true});
    e.push_back({c.i[(a + 1) % c.k], c.j[a], false});
  }
  return e;
}

namespace {

using Key = std::pair<int, int>;

Key key_of(const Edge& e) { return {e.i_vertex, e.j_vertex}; }

bool canonical_labels(const IndexCircuit& c) {
  if (c.i[0] != 1 || c.j[0] != 1) return false;
  int max_i = 1, max_j = 1;
  for (int a = 1; a < c.k; ++a) {
    if (c.i[a] > max_i + 1 || c.j[a] > max_j + 1) return false;
    max_i = std::max(max_i, c.i[a]);
    max_j = std::max(max_j, c.j[a]);
  }
  return true;
}

}  // namespace

Classification classify(const IndexCircuit& circuit) {
  circuit.validate();
  const int k = circuit.k;
  Classification out;
  out.edges = edges_of(circuit);
  const auto& edges = out.edges;
  const std::size_t m = edges.size();

  // Innovations: edges that reach a vertex not seen earlier in the traversal.
  std::vector<bool> innovation(m, false);
  {
    std::vector<int> seen_i{circuit.i[0]};
    std::vector<int> seen_j;
    auto fresh = [](std::vector<int>& seen, int v) {
      if (std::find(seen.begin(), seen.end(), v) != seen.end()) return false;
      seen.push_back(v);
      return true;
    };
    for (int a = 0; a < k; ++a) {
      innovation[2 * a] = fresh(seen_j, circuit.j[a]);
      innovation[2 * a + 1] = a + 1 < k && fresh(seen_i, circuit.i[a + 1]);
    }
  }

  // Coincidence classes in order of first appearance.
  std::map<Key, std::vector<std::size_t>> members;
  std::vector<Key> order;
  for (std::size_t q = 0; q < m; ++q) {
    auto [it, inserted] = members.try_emplace(key_of(edges[q]));
    if (inserted) order.push_back(it->first);
    it->second.push_back(q);
  }

  std::vector<EdgeLabel> labels(m, EdgeLabel::t4_other);
  GraphStats& s = out.stats;
  s.is_W = true;

  for (std::size_t q = 0; q < m; ++q) {
    if (!innovation[q]) continue;
    ++s.l;
    if (edges[q].column) {
      ++s.c;
      const bool next_is_row_innovation = innovation[q + 1];
      labels[q] = next_is_row_innovation ? EdgeLabel::column_innovation_t11
                                         : EdgeLabel::column_innovation_t12;
      if (next_is_row_innovation) ++s.r1;
    } else {
      ++s.r;
      labels[q] = EdgeLabel::row_innovation;
    }
  }

  for (const Key& key : order) {
    const auto& cls = members.at(key);
    if (cls.size() < 2) s.is_W = false;
    if (innovation[cls.front()]) {
      // innovation, then its T3 edge, then T4 edges (the first being T21).
      if (cls.size() >= 2) {
        labels[cls[1]] = EdgeLabel::t3_irregular;
        ++s.t3_count;
      }
      if (cls.size() >= 3) {
        labels[cls[2]] = EdgeLabel::t21;
        ++s.t;
        ++s.mu;
        const int t4 = static_cast<int>(cls.size()) - 2;
        s.n_i.push_back(t4);
        if (t4 == 1) ++s.mu1;
        s.t4_count += t4;
      }
    } else {
      labels[cls.front()] = EdgeLabel::t22;
      ++s.t;
      s.m_j.push_back(static_cast<int>(cls.size()));
      s.t4_count += static_cast<int>(cls.size());
    }
  }

  // A T3 edge is regular when, among the edges before it, more than one
  // innovation touches its initial vertex and is still single.
  for (std::size_t q = 0; q < m; ++q) {
    if (labels[q] != EdgeLabel::t3_irregular) continue;
    const Edge& e = edges[q];
    int candidates = 0;
    for (std::size_t u = 0; u < q; ++u) {
      if (!innovation[u]) continue;
      const bool touches = e.column ? edges[u].i_vertex == e.i_vertex
                                    : edges[u].j_vertex == e.j_vertex;
      if (!touches) continue;
      const Key ku = key_of(edges[u]);
      int copies = 0;
      for (std::size_t w = 0; w < q; ++w) copies += key_of(edges[w]) == ku;
      if (copies == 1) ++candidates;
    }
    if (candidates > 1) {
      labels[q] = EdgeLabel::t3_regular;
      ++s.t3_regular;
    }
  }

  s.is_canonical = canonical_labels(circuit);
  out.labels = std::move(labels);
  return out;
}

std::vector<int> coincidence_class_sizes(const IndexCircuit& circuit) {
  circuit.validate();
  std::map<Key, int> slot;
  std::vector<int> sizes;
  for (const Edge& e : edges_of(circuit)) {
    auto [it, inserted] = slot.try_emplace(key_of(e), static_cast<int>(sizes.size()));
    if (inserted) sizes.push_back(0);
    ++sizes[static_cast<std::size_t>(it->second)];
  }
  return sizes;
}

namespace {

/// Product over class sizes, shared by the single-circuit and enumeration
/// paths. `sizes` may be any iterable of ints.
template <typename Sizes>
double class_product(const Sizes& sizes, std::span<const double> moments) {
  const bool centered = !moments.empty() && moments[0] == 0.0;
  for (int s : sizes) {
    if (s == 1 && centered) return 0.0;
  }
  double product = 1.0;
  for (int s : sizes) {
    if (static_cast<std::size_t>(s) > moments.size()) {
      throw ParameterError("moment of order " + std::to_string(s) + " is required but only " +
                           std::to_string(moments.size()) + " were supplied");
    }
    product *= moments[static_cast<std::size_t>(s - 1)];
  }
  return product;
}

void check_enumeration(std::int64_t p, std::int64_t n, int k) {
  if (p < 1 || n < 1) throw ValidationError("p and n must be positive");
  if (k < 1) throw ValidationError("moment order k must be >= 1");
  const double terms = std::pow(static_cast<double>(p), k) * std::pow(static_cast<double>(n), k);
  if (terms > kEnumerationBudget) {
    throw ResourceError("enumeration of p^k n^k = " + io::format_double(terms) +
                        " terms exceeds the budget of 1e8");
  }
}

/// Calls visit(sizes) with the run lengths of every star-constrained circuit
/// whose first i-index is i1 (0-based internally).
template <typename Visit>
void for_each_star_circuit(std::int64_t p, std::int64_t n, int k, int i1, Visit&& visit) {
  std::vector<int> i(static_cast<std::size_t>(k), 0), j(static_cast<std::size_t>(k), 0);
  std::vector<std::int64_t> codes(2 * static_cast<std::size_t>(k));
  std::vector<int> runs;
  runs.reserve(codes.size());
  i[0] = i1;

  auto star_ok = [&] {
    for (int a = 0; a < k; ++a) {
      if (i[a] == i[(a + 1) % k]) return false;
    }
    return true;
  };

  while (true) {
    if (star_ok()) {
      std::fill(j.begin(), j.end(), 0);
      while (true) {
        for (int a = 0; a < k; ++a) {
          codes[2 * a] = static_cast<std::int64_t>(i[a]) * n + j[a];
          codes[2 * a + 1] = static_cast<std::int64_t>(i[(a + 1) % k]) * n + j[a];
        }
        std::sort(codes.begin(), codes.end());
        runs.clear();
        for (std::size_t u = 0; u < codes.size();) {
          std::size_t w = u;
          while (w < codes.size() && codes[w] == codes[u]) ++w;
          runs.push_back(static_cast<int>(w - u));
          u = w;
        }
        visit(runs);

        int a = 0;
        while (a < k && ++j[a] == n) j[a++] = 0;
        if (a == k) break;
      }
    }
    // i[0] is fixed; advance i[1..k-1].
    int a = 1;
    while (a < k && ++i[a] == p) i[a++] = 0;
    if (a == k) break;
  }
}

}  // namespace

double expectation_of_circuit(const IndexCircuit& circuit, std::span<const double> moments) {
  return class_product(coincidence_class_sizes(circuit), moments);
}

double trace_moment_sum(std::int64_t p, std::int64_t n, int k, std::span<const double> moments) {
  check_enumeration(p, n, k);
  std::vector<double> partial(static_cast<std::size_t>(p));
  for (int i1 = 0; i1 < p; ++i1) {
    CompensatedSum s;
    for_each_star_circuit(p, n, k, i1, [&](const std::vector<int>& runs) {
      s += class_product(runs, moments);
    });
    partial[static_cast<std::size_t>(i1)] = s.value();
  }
  CompensatedSum total;
  for (double v : partial) total += v;
  return total.value();
}

double exact_trace_moment(std::int64_t p, std::int64_t n, int k, std::span<const double> moments) {
  const double raw = trace_moment_sum(p, n, k, moments);
  // (2 sqrt(np))^k, with the even part formed exactly as (4np)^(k/2).
  const double four_np = 4.0 * static_cast<double>(n) * static_cast<double>(p);
  double scale = std::pow(four_np, k / 2);
  if (k % 2) scale *= std::sqrt(four_np);
  return raw / scale;
}

std::optional<std::int64_t> trace_moment_sum_integer(std::int64_t p, std::int64_t n, int k,
                                                     std::span<const double> moments) {
  check_enumeration(p, n, k);
  std::vector<std::optional<std::int64_t>> im;
  for (double m : moments) {
    if (std::isfinite(m) && std::nearbyint(m) == m && std::abs(m) < 9e15) {
      im.emplace_back(static_cast<std::int64_t>(m));
    } else {
      im.emplace_back(std::nullopt);
    }
  }
  const bool centered = !moments.empty() && moments[0] == 0.0;
  __int128 total = 0;
  bool representable = true;
  for (int i1 = 0; i1 < p && representable; ++i1) {
    for_each_star_circuit(p, n, k, i1, [&](const std::vector<int>& runs) {
      if (!representable) return;
      if (centered && std::find(runs.begin(), runs.end(), 1) != runs.end()) return;
      __int128 product = 1;
      for (int s : runs) {
        if (static_cast<std::size_t>(s) > im.size()) {
          throw ParameterError("moment of order " + std::to_string(s) + " is required");
        }
        const auto& v = im[static_cast<std::size_t>(s - 1)];
        if (!v) {
          representable = false;
          return;
        }
        product *= *v;
      }
      total += product;
    });
  }
  if (!representable) return std::nullopt;
  if (total > std::numeric_limits<std::int64_t>::max() ||
      total < std::numeric_limits<std::int64_t>::min()) {
    return std::nullopt;
  }
  return static_cast<std::int64_t>(total);
}

void for_each_canonical(int k, int p_cap, int n_cap, bool star,
                        const std::function<void(const IndexCircuit&)>& visit) {
  if (k < 1) throw ValidationError("moment order k must be >= 1");
  if (k > 5) throw ResourceError("canonical enumeration is limited to k <= 5");
  if (p_cap < 1 || n_cap < 1) throw ValidationError("label caps must be positive");

  IndexCircuit c;
  c.k = k;
  c.star = star;
  c.i.assign(static_cast<std::size_t>(k), 1);
  c.j.assign(static_cast<std::size_t>(k), 1);

  // Restricted-growth strings on each line, i_a chosen before j_a.
  std::function<void(int, int, int)> extend = [&](int a, int max_i, int max_j) {
    if (a == k) {
      if (star && !c.satisfies_star()) return;
      if (!classify(c).stats.is_W) return;
      visit(c);
      return;
    }
    for (int iv = 1; iv <= std::min(max_i + 1, p_cap); ++iv) {
      if (star && iv == c.i[a - 1]) continue;
      c.i[a] = iv;
      for (int jv = 1; jv <= std::min(max_j + 1, n_cap); ++jv) {
        c.j[a] = jv;
        extend(a + 1, std::max(max_i, iv), std::max(max_j, jv));
      }
    }
  };
  extend(1, 1, 1);
}

std::vector<IndexCircuit> enumerate_canonical(int k, int p_cap, int n_cap, bool star) {
  std::vector<IndexCircuit> out;
  for_each_canonical(k, p_cap, n_cap, star, [&](const IndexCircuit& c) { out.push_back(c); });
  return out;
}

double isomorphism_class_size(const GraphStats& stats, std::int64_t p, std::int64_t n) {
  double size = 1.0;
  for (int u = 0; u <= stats.r; ++u) size *= static_cast<double>(std::max<std::int64_t>(p - u, 0));
  for (int u = 0; u < stats.c; ++u) size *= static_cast<double>(std::max<std::int64_t>(n - u, 0));
  return size;
}

namespace {

double log_binomial(int top, int bottom) {
  return std::lgamma(top + 1.0) - std::lgamma(bottom + 1.0) - std::lgamma(top - bottom + 1.0);
}

bool binomial_nonzero(int top, int bottom) { return bottom >= 0 && top >= 0 && bottom <= top; }

}  // namespace

double log_bound_rhs_a13(double p, double n, int k, double delta) {
  if (k < 1) throw ValidationError("bound needs k >= 1");
  if (!(p > 0.0 && n > 0.0)) throw ValidationError("bound needs positive p and n");
  if (!(delta > 0.0)) throw ValidationError("bound needs delta > 0");

  const double log_p = std::log(p);
  const double log_ratio_half = 0.5 * std::log(p / n);
  const double log_k = std::log(static_cast<double>(k));
  const double log_delta = std::log(delta);

  // The (mu, mu1) double sum only involves delta^mu1, so it collapses to
  // inner[t] = log sum_{m=0}^{t} (t - m + 1) delta^m.
  std::vector<double> inner(static_cast<std::size_t>(2 * k + 1));
  for (int t = 0; t <= 2 * k; ++t) {
    double top = -std::numeric_limits<double>::infinity();
    for (int m = 0; m <= t; ++m) top = std::max(top, std::log(t - m + 1.0) + m * log_delta);
    CompensatedSum s;
    for (int m = 0; m <= t; ++m) s += std::exp(std::log(t - m + 1.0) + m * log_delta - top);
    inner[static_cast<std::size_t>(t)] = top + std::log(s.value());
  }

  // Streaming log-sum-exp.
  double top = -std::numeric_limits<double>::infinity();
  CompensatedSum acc;
  auto push = [&](double v) {
    if (v > top) {
      const double rescale = std::exp(top - v);
      const double kept = acc.value() * rescale;
      acc = CompensatedSum();
      acc += kept;
      top = v;
    }
    acc += std::exp(v - top);
  };
  for (int l = 1; l <= k; ++l) {
    for (int r = 1; r <= l; ++r) {
      for (int r1 = 0; r1 <= r; ++r1) {
        const int t12 = l - r - r1;
        if (!binomial_nonzero(k - r1, t12) || !binomial_nonzero(2 * k - l, l)) continue;
        const double combinatorial = log_binomial(k, r) + log_binomial(r, r1) +
                                     log_binomial(k - r1, t12) + log_binomial(2 * k - l, l);
        for (int t = 0; t <= 2 * k - 2 * l; ++t) {
          push(combinatorial + (r - r1) * log_ratio_half - 0.5 * t * log_p + log_p +
               3.0 * t * log_k + (6.0 * k - 6.0 * l) * std::log(t + 1.0) +
               (2.0 * k - 2.0 * l - 2.0 * t) * log_delta + inner[static_cast<std::size_t>(t)]);
        }
      }
    }
  }
  return -k * std::log(2.0) + top + std::log(acc.value());
}

double bound_rhs_a13(double p, double n, int k, double delta) {
  const double lb = log_bound_rhs_a13(p, n, k, delta);
  const double v = std::exp(lb);
  if (!std::isfinite(v)) {
    throw ResourceError("bound overflows double precision (log value " + io::format_double(lb) +
                        ")");
  }
  return v;
}

ScheduleReport check_schedule(double p, double n, double delta, double C1,
                              const ScheduleThresholds& th) {
  if (!(p >= 2.0)) throw ValidationError("schedule check needs p >= 2");
  if (!(delta > 0.0)) throw ValidationError("schedule check needs delta > 0");
  if (!(C1 >= 0.0)) throw ValidationError("schedule check needs C1 >= 0");

  const double L = std::log(p);
  ScheduleReport rep;
  rep.params = {std::ceil(L * L), std::ceil(L * L), delta, p, n, C1};
  const double h = rep.params.h;
  const double kk = rep.params.kk;

  auto at_least = [](std::string name, double value, double bound) {
    return ScheduleCondition{std::move(name), value, bound, true, value >= bound};
  };
  auto at_most = [](std::string name, double value, double bound) {
    return ScheduleCondition{std::move(name), value, bound, false, value <= bound};
  };
  const double c1_ratio = C1 > 0.0 ? std::pow(delta, 4) * p / C1
                                   : std::numeric_limits<double>::infinity();

  rep.h_conditions = {
      at_least("h/log(p) large", h / L, th.large_ratio),
      at_most("delta^2 h/log(p) small", delta * delta * h / L, th.small_ratio),
      at_least("delta^4 p/C1 >= sqrt(p)", c1_ratio, std::sqrt(p)),
  };
  rep.k_conditions = {
      at_least("k/log(p) large", kk / L, th.large_ratio),
      at_most("delta^(1/3) k/log(p) small", std::cbrt(delta) * kk / L, th.small_ratio),
      at_least("delta^2 p^(1/4)/k^3 >= 1", delta * delta * std::pow(p, 0.25) / (kk * kk * kk),
               1.0),
  };
  auto all = [](const std::vector<ScheduleCondition>& v) {
    return std::all_of(v.begin(), v.end(), [](const auto& c) { return c.pass; });
  };
  rep.h_feasible = all(rep.h_conditions);
  rep.k_feasible = all(rep.k_conditions);
  return rep;
}

IndexCircuit circuit_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
    IndexCircuit c;
    c.i = j.at("i").get<std::vector<int>>();
    c.j = j.at("j").get<std::vector<int>>();
    c.k = j.contains("k") ? j.at("k").get<int>() : static_cast<int>(c.i.size());
    if (j.contains("star")) {
      c.star = j.at("star").get<bool>();
    } else {
      c.star = static_cast<int>(c.i.size()) == c.k && c.satisfies_star();
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed circuit JSON: ") + e.what());
  }
}

namespace {

ordered_json circuit_json(const IndexCircuit& c) {
  ordered_json j;
  j["k"] = c.k;
  j["i"] = c.i;
  j["j"] = c.j;
  j["star"] = c.star;
  return j;
}

}  // namespace

std::string circuit_to_json(const IndexCircuit& c) { return circuit_json(c).dump(); }

std::string classification_to_json(const IndexCircuit& c, const Classification& cls) {
  ordered_json j;
  j["circuit"] = circuit_json(c);
  ordered_json edges = ordered_json::array();
  for (std::size_t q = 0; q < cls.edges.size(); ++q) {
    const Edge& e = cls.edges[q];
    edges.push_back({{"index", q + 1},
                     {"type", e.column ? "column" : "row"},
                     {"i", e.i_vertex},
                     {"j", e.j_vertex},
                     {"label", label_name(cls.labels[q])}});
  }
  j["edges"] = edges;
  const GraphStats& s = cls.stats;
  j["stats"] = {{"l", s.l},   {"r", s.r},     {"c", s.c},   {"r1", s.r1},       {"t", s.t},
                {"mu", s.mu}, {"mu1", s.mu1}, {"n_i", s.n_i}, {"m_j", s.m_j},   {"t3", s.t3_count},
                {"t4", s.t4_count}, {"t3_regular", s.t3_regular}, {"is_W", s.is_W},
                {"is_canonical", s.is_canonical}};
  return j.dump(2);
}

std::string schedule_to_json(const ScheduleReport& rep) {
  auto conds = [](const std::vector<ScheduleCondition>& v) {
    ordered_json a = ordered_json::array();
    for (const auto& c : v) {
      a.push_back({{"condition", c.name},
                   {"value", c.value},
                   {"bound", c.bound},
                   {"relation", c.at_least ? ">=" : "<="},
                   {"pass", c.pass}});
    }
    return a;
  };
  ordered_json j;
  j["p"] = rep.params.p;
  j["n"] = rep.params.n;
  j["delta"] = rep.params.delta;
  j["C1"] = rep.params.C1;
  j["h"] = rep.params.h;
  j["k"] = rep.params.kk;
  j["h_conditions"] = conds(rep.h_conditions);
  j["k_conditions"] = conds(rep.k_conditions);
  j["h_feasible"] = rep.h_feasible;
  j["k_feasible"] = rep.k_feasible;
  return j.dump(2);
}

void write_bound_table(std::ostream& out, std::span<const BoundRow> rows) {
  out << "p,n,k,delta,bound,exact,ratio\n";
  for (const auto& r : rows) {
    out << r.p << ',' << r.n << ',' << r.k << ',' << io::format_double(r.delta) << ','
        << io::format_double(r.bound) << ',';
    if (r.exact) {
      out << io::format_double(*r.exact) << ',' << io::format_double(r.bound / *r.exact);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

}  // namespace lmax::momentlab
