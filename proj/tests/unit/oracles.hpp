#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library except for plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Composite Simpson rule with `intervals` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int intervals = 20000) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double s = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

/// Integral over the real line through x = tan(theta).
inline double simpson_real_line(const std::function<double(double)>& f, int intervals = 200000) {
  const double edge = M_PI / 2 - 1e-9;
  return simpson(
      [&](double th) {
        const double c = std::cos(th);
        return f(std::tan(th)) / (c * c);
      },
      -edge, edge, intervals);
}

/// Triple loop product X X^T.
inline Eigen::MatrixXd gram_loops(const Eigen::MatrixXd& X) {
  const auto p = X.rows(), n = X.cols();
  Eigen::MatrixXd G(p, p);
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = 0; b < p; ++b) {
      long double s = 0;
      for (Eigen::Index j = 0; j < n; ++j) s += (long double)X(a, j) * X(b, j);
      G(a, b) = static_cast<double>(s);
    }
  }
  return G;
}

/// (1/n) sum_j (s_j - mean)(s_j - mean)^T term by term.
inline Eigen::MatrixXd centered_cov_loops(const Eigen::MatrixXd& X) {
  const auto p = X.rows(), n = X.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < n; ++j) mean += X.col(j);
  mean /= double(n);
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd d = X.col(j) - mean;
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) S(a, b) += d(a) * d(b);
  }
  return S / double(n);
}

/// Real roots of the characteristic polynomial of a symmetric 3x3 matrix
/// (trigonometric form), ascending.
inline std::vector<double> sym3_eigenvalues(const Eigen::Matrix3d& A) {
  const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
  const double q = A.trace() / 3.0;
  const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) +
                    (A(2, 2) - q) * (A(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  const Eigen::Matrix3d Bm = (A - q * Eigen::Matrix3d::Identity()) / p;
  double r = Bm.determinant() / 2.0;
  r = std::clamp(r, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  std::vector<double> v{e1, e2, e3};
  std::sort(v.begin(), v.end());
  return v;
}

/// Largest eigenvalue of a symmetric matrix by plain power iteration on a
/// shifted copy (shift makes it positive definite).
inline double power_lambda_max(const Eigen::MatrixXd& M, int iters = 20000) {
  const double shift = M.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::VectorXd v = Eigen::VectorXd::Ones(M.rows()).normalized();
  double lam = 0;
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd w = M * v + shift * v;
    lam = v.dot(w);
    v = w.normalized();
  }
  return lam - shift;
}

/// Semicircle CDF on [-1, 1] by quadrature of the density.
inline double semicircle_cdf_quadrature(double x) {
  if (x <= -1) return 0;
  if (x >= 1) return 1;
  return simpson([](double t) { return 2.0 / M_PI * std::sqrt(std::max(0.0, 1 - t * t)); }, -1.0,
                 x, 200000);
}

/// tr(M^k) by repeated multiplication.
inline double trace_power(const Eigen::MatrixXd& M, int k) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(M.rows(), M.cols());
  for (int i = 0; i < k; ++i) P = P * M;
  return P.trace();
}

}  // namespace oracle
