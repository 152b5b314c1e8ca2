#pragma once

#include <algorithm>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lmax/ensemble.hpp"

namespace lmax {

/// Largest p for which the dense eigensolver is offered.
inline constexpr Eigen::Index kDenseLimit = 2000;

/// Full ascending spectrum of a symmetric matrix. Rejects matrices whose
/// asymmetry exceeds 1e-10 (relative to the largest entry) and p > kDenseLimit.
Eigen::VectorXd eigvals_sym(const Eigen::MatrixXd& M);

struct MatfreeResult {
  double lambda_max = 0.0;
  long iterations = 0;  // products v -> X (X^T v)
  double residual = 0.0;
};

/// Largest eigenvalue of (X X^T - n I) / (2 sqrt(np)) without forming the
/// p x p Gram matrix. Explicitly restarted Lanczos with full
/// reorthogonalization; stops when both the Ritz value change over one
/// restart cycle and the residual norm are <= tol * max(1, |lambda|).
/// Throws ConvergenceError after max_iter products.
MatfreeResult lambda_max_matfree(const DataMatrix& X, double tol = 1e-10, long max_iter = 20000);

/// Semicircle law on [-1, 1] with density (2/pi) sqrt(1 - x^2).
struct SemicircleRef {
  static double density(double x);
  static double cdf(double x);
  /// Inverse of cdf on [0, 1], by bisection.
  static double quantile(double u);
};

inline double semicircle_cdf(double x) { return SemicircleRef::cdf(x); }

/// Right-continuous ESD x -> #{lambda_i <= x} / p.
class Esd {
 public:
  /// Throws ValidationError on unsorted or empty input.
  explicit Esd(std::vector<double> sorted_eigenvalues);
  explicit Esd(const Eigen::VectorXd& sorted_eigenvalues);

  double operator()(double x) const;
  std::size_t count_le(double x) const;
  std::size_t size() const noexcept { return eig_.size(); }
  const std::vector<double>& eigenvalues() const noexcept { return eig_; }

 private:
  std::vector<double> eig_;
};

inline Esd esd(const Eigen::VectorXd& sorted_eigenvalues) { return Esd(sorted_eigenvalues); }

/// Exact two-sided KS statistic between the ESD of sorted eigenvalues and
/// the semicircle CDF, evaluated on both sides of every jump.
double ks_distance(const Eigen::VectorXd& sorted_eigenvalues, const SemicircleRef& ref = {});

/// sup_x |F_a(x) - F_b(x)| expressed as the largest count difference; the
/// real-valued distance is this divided by p.
std::size_t esd_sup_count_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Exact sup-norm distance between two ESDs of equal size.
double esd_sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// max_i |sum_j (X_ij^2 - 1)| / sqrt(np).
double diag_max_dev(const DataMatrix& X);

enum class SpectralMethod { dense, matfree };

struct SpectralSummary {
  Eigen::VectorXd eigenvalues;  // empty for the matrix-free method
  double lambda_max = 0.0;
  std::optional<double> ks_to_semicircle;
  double diag_max_dev = 0.0;
  SpectralMethod method = SpectralMethod::dense;
  long iterations = 0;
};

/// Spectral summary of A_p for one sample matrix.
SpectralSummary summarize_spectrum(const DataMatrix& X, SpectralMethod method,
                                   double tol = 1e-10, long max_iter = 20000);

std::string to_json(const SpectralSummary& s);

/// CSV with header "index,eigenvalue", 1-based index.
void write_spectrum_csv(std::ostream& out, const Eigen::VectorXd& eigenvalues);

}  // namespace lmax
