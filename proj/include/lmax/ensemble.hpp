#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lmax {

enum class DistributionKind {
  gaussian,
  rademacher,
  uniform_symmetric,
  centered_exponential,
  student_t,
  two_point,
};

/// An entry distribution, always shifted and scaled internally to mean 0 and
/// variance 1. `df` is used by student_t; `a` and `q` by two_point, where the
/// raw variable is +a with probability q and -a otherwise.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::gaussian;
  double df = 0.0;
  double a = 1.0;
  double q = 0.5;

  static DistributionSpec gaussian() { return {DistributionKind::gaussian}; }
  static DistributionSpec rademacher() { return {DistributionKind::rademacher}; }
  static DistributionSpec uniform_symmetric() { return {DistributionKind::uniform_symmetric}; }
  static DistributionSpec centered_exponential() { return {DistributionKind::centered_exponential}; }
  static DistributionSpec student_t(double df) { return {DistributionKind::student_t, df}; }
  static DistributionSpec two_point(double a, double q) { return {DistributionKind::two_point, 0.0, a, q}; }

  /// Throws ParameterError when the parameters leave their domain.
  void validate() const;

  std::string name() const;
  bool operator==(const DistributionSpec&) const = default;
};

struct StandardizedMoments {
  double m1 = 0.0;
  double m2 = 1.0;
  double m3 = 0.0;  // NaN when E|X|^3 is infinite
  double m4 = 0.0;  // +inf when the fourth moment does not exist
  bool m4_finite = true;
};

StandardizedMoments standardized_moments(const DistributionSpec& spec);

/// Raw moments E X^s for s = 1..order of the standardized variable. Entry
/// s - 1 holds E X^s; infinite moments are +inf, undefined odd moments NaN.
std::vector<double> moment_sequence(const DistributionSpec& spec, int order);

/// Largest s for which E|X|^s < inf (a large sentinel for light tails).
int finite_moment_order(const DistributionSpec& spec);

/// Standardized density; zero for the discrete kinds.
double standardized_pdf(const DistributionSpec& spec, double x);
bool is_discrete(const DistributionSpec& spec);

struct MatrixShape {
  std::int64_t p = 1;
  std::int64_t n = 1;

  MatrixShape() = default;
  MatrixShape(std::int64_t p_, std::int64_t n_);

  /// p/n, reduced as a rational first.
  double ratio() const;
  std::int64_t entries() const { return p * n; }
  bool operator==(const MatrixShape&) const = default;
  auto operator<=>(const MatrixShape&) const = default;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

struct SeedSpec {
  std::uint64_t master_seed = 0;

  /// Stream seed for one (p, n, replicate) cell of a sweep.
  std::uint64_t derive(const MatrixShape& shape, std::int64_t replicate) const noexcept;
};

struct Provenance {
  std::optional<DistributionSpec> distribution;  // empty for synthetic input
  SeedSpec seed;
  std::int64_t replicate = 0;
};

/// An immutable p x n sample matrix with its generation record.
class DataMatrix {
 public:
  DataMatrix() = default;
  DataMatrix(Eigen::MatrixXd entries, Provenance provenance);

  /// Wraps explicit values with a synthetic provenance.
  static DataMatrix from_values(Eigen::MatrixXd entries);

  const MatrixShape& shape() const noexcept { return shape_; }
  std::int64_t p() const noexcept { return shape_.p; }
  std::int64_t n() const noexcept { return shape_.n; }
  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  const Provenance& provenance() const noexcept { return provenance_; }

  /// Same provenance, new entries of the same shape.
  DataMatrix with_entries(Eigen::MatrixXd entries) const;

 private:
  MatrixShape shape_;
  Eigen::MatrixXd entries_;
  Provenance provenance_;
};

DataMatrix sample_matrix(const DistributionSpec& spec, const MatrixShape& shape,
                         const SeedSpec& seed, std::int64_t replicate);

struct EmpiricalMomentReport {
  double m1 = 0.0;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  double max_abs = 0.0;
};

EmpiricalMomentReport empirical_moment_report(const DataMatrix& X);

}  // namespace lmax
