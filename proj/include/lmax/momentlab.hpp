#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lmax::momentlab {

/// Index sequences i_1..i_k (values in [1, p]) and j_1..j_k (values in
/// [1, n]) describing one term X_{i1 j1} X_{i2 j1} X_{i2 j2} ... X_{i1 jk}
/// of tr(B^k). With `star` set, cyclically adjacent i-indices must differ.
struct IndexCircuit {
  int k = 0;
  std::vector<int> i;
  std::vector<int> j;
  bool star = true;

  /// Throws ValidationError on a malformed circuit.
  void validate() const;
  /// True when every cyclically adjacent pair of i-indices differs.
  bool satisfies_star() const;
};

enum class EdgeLabel {
  column_innovation_t11,
  column_innovation_t12,
  row_innovation,
  t3_regular,
  t3_irregular,
  t21,
  t22,
  t4_other,
};

const char* label_name(EdgeLabel label);
bool is_innovation(EdgeLabel label);
bool is_t3(EdgeLabel label);
bool is_t4(EdgeLabel label);  // T21, T22 and the remaining T4 edges

/// Edge e_q of the circuit (q is 0-based here). Column edges join i_a to
/// j_a, row edges join j_a to i_{a+1}. Two edges coincide iff they join the
/// same I-vertex to the same J-vertex.
struct Edge {
  int i_vertex = 0;
  int j_vertex = 0;
  bool column = true;
};

std::vector<Edge> edges_of(const IndexCircuit& c);

struct GraphStats {
  int l = 0;    // innovations
  int r = 0;    // row innovations
  int c = 0;    // column innovations
  int r1 = 0;   // T11 edges
  int t = 0;    // T2 edges
  int mu = 0;   // T21 edges
  int mu1 = 0;  // T21 edges whose class has exactly one T4 edge
  std::vector<int> n_i;  // T4 count on each innovation class that has a T21 edge
  std::vector<int> m_j;  // size of each class opened by a T22 edge
  int t3_count = 0;
  int t4_count = 0;
  int t3_regular = 0;
  bool is_W = false;
  bool is_canonical = false;  // first-appearance labelling with i_1 = j_1 = 1

  int t12() const { return c - r1; }
  int t22() const { return t - mu; }
};

struct Classification {
  std::vector<Edge> edges;
  std::vector<EdgeLabel> labels;
  GraphStats stats;
};

/// Labels every edge by replaying the traversal e_1, e_2, ..., e_2k.
Classification classify(const IndexCircuit& circuit);

/// Sizes of the edge coincidence classes, in order of first appearance.
std::vector<int> coincidence_class_sizes(const IndexCircuit& circuit);

/// E of the circuit's product for i.i.d. entries with raw moments
/// moments[s-1] = E X^s: the product of m_{size} over coincidence classes.
/// Zero as soon as a class is a single edge and m_1 = 0. Throws
/// ParameterError when a needed order is missing.
double expectation_of_circuit(const IndexCircuit& circuit, std::span<const double> moments);

/// Hard cap on p^k n^k for the brute-force enumeration.
inline constexpr double kEnumerationBudget = 1e8;

/// Sum of expectation_of_circuit over all star-constrained circuits, without
/// the (2 sqrt(np))^{-k} factor. Compensated summation, partitioned by i_1
/// and merged in order.
double trace_moment_sum(std::int64_t p, std::int64_t n, int k, std::span<const double> moments);

/// E tr(B_p^k) by exhaustive enumeration. Throws ResourceError beyond the
/// budget.
double exact_trace_moment(std::int64_t p, std::int64_t n, int k, std::span<const double> moments);

/// The same sum in integer arithmetic; empty unless every moment that
/// appears is an integer.
std::optional<std::int64_t> trace_moment_sum_integer(std::int64_t p, std::int64_t n, int k,
                                                     std::span<const double> moments);

/// Canonical circuits (first-appearance labelling) that are W-graphs, with
/// i-labels capped at p_cap and j-labels at n_cap. Requires k <= 5.
void for_each_canonical(int k, int p_cap, int n_cap, bool star,
                        const std::function<void(const IndexCircuit&)>& visit);
std::vector<IndexCircuit> enumerate_canonical(int k, int p_cap, int n_cap, bool star = true);

/// p (p-1) ... (p-r) * n (n-1) ... (n-c+1): the number of circuits
/// isomorphic to a canonical one with the given stats.
double isomorphism_class_size(const GraphStats& stats, std::int64_t p, std::int64_t n);

/// The sextuple-sum upper bound on E tr(B_p^k) for entries bounded by
/// delta (np)^{1/4}, evaluated in log space.
double log_bound_rhs_a13(double p, double n, int k, double delta);
/// exp(log_bound_rhs_a13); throws ResourceError if that overflows.
double bound_rhs_a13(double p, double n, int k, double delta);

/// Proof schedule for the moment orders: h for the diagonal deviation bound
/// and kk for the trace bound.
struct ScheduleParams {
  double h = 0.0;
  double kk = 0.0;
  double delta = 0.0;
  double p = 0.0;
  double n = 0.0;
  double C1 = 0.0;
};

struct ScheduleCondition {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool at_least = true;  // value >= bound when true, value <= bound otherwise
  bool pass = false;
};

struct ScheduleReport {
  ScheduleParams params;
  std::vector<ScheduleCondition> h_conditions;
  std::vector<ScheduleCondition> k_conditions;
  bool h_feasible = false;
  bool k_feasible = false;
};

/// Growth conditions are asymptotic; at a concrete p a ratio counts as
/// "large" when >= large_ratio and "small" when <= small_ratio.
struct ScheduleThresholds {
  double large_ratio = 10.0;
  double small_ratio = 0.1;
};

/// Proposes h = kk = ceil(log^2 p) and evaluates every condition of both
/// schedules. p and n are real so that synthetic sizes like e^100 work.
ScheduleReport check_schedule(double p, double n, double delta, double C1,
                              const ScheduleThresholds& thresholds = {});

// JSON / CSV surfaces.
IndexCircuit circuit_from_json(const std::string& text);
std::string circuit_to_json(const IndexCircuit& c);
std::string classification_to_json(const IndexCircuit& c, const Classification& cls);
std::string schedule_to_json(const ScheduleReport& report);

struct BoundRow {
  std::int64_t p = 0;
  std::int64_t n = 0;
  int k = 0;
  double delta = 0.0;
  double bound = 0.0;
  std::optional<double> exact;
};

/// Header "p,n,k,delta,bound,exact,ratio"; exact and ratio empty when unknown.
void write_bound_table(std::ostream& out, std::span<const BoundRow> rows);

}  // namespace lmax::momentlab
