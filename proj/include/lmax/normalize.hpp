#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "lmax/ensemble.hpp"
#include "lmax/errors.hpp"

namespace lmax {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// X X^T formed through a lower-triangular rank update, then mirrored so the
/// result is symmetric to the bit.
template <typename Derived>
Mat<typename Derived::Scalar> gram(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> G = Mat<Scalar>::Zero(X.rows(), X.rows());
  G.template selfadjointView<Eigen::Lower>().rankUpdate(X.derived());
  G.template triangularView<Eigen::StrictlyUpper>() = G.transpose();
  return G;
}

/// Copies the lower triangle onto the upper one.
template <typename Derived>
void mirror_lower(Eigen::MatrixBase<Derived>& M) {
  M.template triangularView<Eigen::StrictlyUpper>() = M.transpose();
}

/// (X X^T - n I) / (2 sqrt(n p)).
template <typename Derived>
Mat<typename Derived::Scalar> build_A(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Scalar p = static_cast<Scalar>(X.rows());
  const Scalar n = static_cast<Scalar>(X.cols());
  Mat<Scalar> A = gram(X);
  A.diagonal().array() -= n;
  A /= Scalar(2) * std::sqrt(n * p);
  return A;
}

/// build_A with the diagonal removed.
template <typename Derived>
Mat<typename Derived::Scalar> build_B(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  Mat<Scalar> B = build_A(X);
  B.diagonal().setZero();
  return B;
}

/// Row means of X, i.e. the average sample vector.
template <typename Derived>
Vec<typename Derived::Scalar> sample_mean(const Eigen::MatrixBase<Derived>& X) {
  return X.rowwise().mean();
}

/// Centered sample covariance (1/n) sum_j (s_j - mean)(s_j - mean)^T, formed
/// as X X^T / n - mean mean^T.
template <typename Derived>
Mat<typename Derived::Scalar> build_S1(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Scalar n = static_cast<Scalar>(X.cols());
  const Vec<Scalar> mean = sample_mean(X);
  Mat<Scalar> S = gram(X) / n;
  S.template selfadjointView<Eigen::Lower>().rankUpdate(mean, Scalar(-1));
  mirror_lower(S);
  return S;
}

/// (1/2) sqrt(n/p) (S1 - I).
template <typename Derived>
Mat<typename Derived::Scalar> build_A1(const Eigen::MatrixBase<Derived>& X) {
  using Scalar = typename Derived::Scalar;
  const Scalar p = static_cast<Scalar>(X.rows());
  const Scalar n = static_cast<Scalar>(X.cols());
  Mat<Scalar> A1 = build_S1(X);
  A1.diagonal().array() -= Scalar(1);
  A1 *= Scalar(0.5) * std::sqrt(n / p);
  return A1;
}

inline Eigen::MatrixXd build_A(const DataMatrix& X) { return build_A(X.entries()); }
inline Eigen::MatrixXd build_B(const DataMatrix& X) { return build_B(X.entries()); }
inline Eigen::MatrixXd build_S1(const DataMatrix& X) { return build_S1(X.entries()); }
inline Eigen::MatrixXd build_A1(const DataMatrix& X) { return build_A1(X.entries()); }

// ---------------------------------------------------------------------------
// Truncation, recentering and rescaling of the entries.

/// (np)^(-1/8): tends to zero while the threshold delta (np)^(1/4) = (np)^(1/8)
/// grows without bound.
double default_delta(const MatrixShape& shape);

/// delta * (np)^(1/4).
double truncation_threshold(const MatrixShape& shape, double delta);

enum class RecenterMode { empirical, population };

struct NormalizationParams {
  std::optional<double> explicit_delta;  // empty selects default_delta
  RecenterMode recenter_mode = RecenterMode::empirical;

  /// Resolved delta for a shape. Throws ValidationError unless delta > 0
  /// and delta (np)^(1/4) > 1.
  double delta_for(const MatrixShape& shape) const;
};

struct TruncationReport {
  double threshold = 0.0;
  double fraction_truncated = 0.0;
  double center = 0.0;    // E of the truncated entry used for recentering
  double sigma2 = 1.0;    // its variance, used for rescaling
  double post_mean = 0.0;    // measured mean of the output entries
  double post_sigma2 = 0.0;  // measured variance of the output entries
};

/// Entries with |x| above the threshold are replaced by zero (an indicator
/// cut, not clipping). post_mean / post_sigma2 describe the cut matrix.
std::pair<DataMatrix, TruncationReport> truncate(const DataMatrix& X, double delta);
std::pair<DataMatrix, TruncationReport> truncate_at(const DataMatrix& X, double threshold);

/// Mean and variance of X 1(|X| <= threshold) for the standardized law,
/// by adaptive quadrature (exact sums for the discrete kinds).
struct TruncatedMoments {
  double mean = 0.0;
  double variance = 1.0;
};
TruncatedMoments truncated_population_moments(const DistributionSpec& spec, double threshold);

/// Population recentering needs the law and the threshold that produced X̂.
struct PopulationModel {
  DistributionSpec spec;
  double threshold = 0.0;
};

struct Recentered {
  DataMatrix matrix;
  double center = 0.0;
  double sigma2 = 1.0;
};

/// (X̂ - center) / sigma. Empirical mode uses the entrywise sample mean and
/// (biased) sample variance; population mode integrates the truncated law.
/// Throws DegenerateInputError on zero variance.
Recentered recenter_rescale(const DataMatrix& Xhat, RecenterMode mode,
                            const std::optional<PopulationModel>& model = std::nullopt);

/// truncate followed by recenter_rescale. The report's post_* fields then
/// describe the final matrix.
std::pair<DataMatrix, TruncationReport> normalize_entries(
    const DataMatrix& X, const NormalizationParams& params,
    const std::optional<DistributionSpec>& spec = std::nullopt);

// ---------------------------------------------------------------------------
// Population covariance.

struct CovarianceSpec {
  struct Identity {};
  struct Diagonal {
    std::vector<double> d;
  };
  struct Toeplitz {
    double rho = 0.0;
  };
  struct Explicit {
    Eigen::MatrixXd matrix;
  };
  std::variant<Identity, Diagonal, Toeplitz, Explicit> kind;

  static CovarianceSpec identity() { return {Identity{}}; }
  static CovarianceSpec diagonal(std::vector<double> d) { return {Diagonal{std::move(d)}}; }
  static CovarianceSpec toeplitz(double rho) { return {Toeplitz{rho}}; }
  static CovarianceSpec explicit_matrix(Eigen::MatrixXd m) { return {Explicit{std::move(m)}}; }

  std::string kind_name() const;

  /// The p x p matrix. Throws ValidationError on size mismatch, asymmetry,
  /// negative diagonal entries or |rho| >= 1.
  Eigen::MatrixXd materialize(Eigen::Index p) const;
};

/// Symmetric PSD square root. Eigenvalues below -1e-10 are rejected; the
/// remaining small negatives are clamped to zero.
Eigen::MatrixXd sqrt_psd(const CovarianceSpec& sigma, Eigen::Index p);

/// Sigma^{1/2} S1 Sigma^{1/2}; with Sigma = I this returns S1 unchanged.
Eigen::MatrixXd build_S2(const DataMatrix& X, const CovarianceSpec& sigma);

/// Largest singular value of a symmetric matrix.
double spectral_norm_sym(const Eigen::MatrixXd& M);

}  // namespace lmax
