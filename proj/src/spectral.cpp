#include "lmax/spectral.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include <json.hpp>

#include "lmax/errors.hpp"
#include "lmax/matrix_io.hpp"
#include "lmax/normalize.hpp"
#include "lmax/numeric.hpp"

namespace lmax {

Eigen::VectorXd eigvals_sym(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw ValidationError("eigvals_sym needs a square matrix");
  if (M.rows() == 0) return {};
  if (M.rows() > kDenseLimit) {
    throw ResourceError("dense eigensolver limited to p <= " + std::to_string(kDenseLimit) +
                        "; use the matrix-free route");
  }
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw ValidationError("eigvals_sym: matrix is not symmetric within 1e-10");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceError("symmetric eigensolver failed", NAN, 0);
  return es.eigenvalues();
}

MatfreeResult lambda_max_matfree(const DataMatrix& X, double tol, long max_iter) {
  if (!(tol > 0.0)) throw ValidationError("matrix-free tolerance must be positive");
  const Eigen::MatrixXd& e = X.entries();
  const Eigen::Index p = e.rows();
  const double n = static_cast<double>(e.cols());
  const double scale = 2.0 * std::sqrt(n * static_cast<double>(p));
  const Eigen::Index m = std::min<Eigen::Index>(p, 40);

  long products = 0;
  auto apply = [&](const Eigen::VectorXd& v) {
    ++products;
    Eigen::VectorXd w = e * (e.transpose() * v);
    return w;
  };

  Eigen::VectorXd start(p);
  {
    std::mt19937_64 rng(0x5eedc0ffeeULL);
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < p; ++i) start(i) = normal(rng);
    start.normalize();
  }

  Eigen::MatrixXd V(p, m);
  Eigen::VectorXd alpha(m), beta(m);
  double best = -std::numeric_limits<double>::infinity();
  std::optional<double> previous;

  while (products < max_iter) {
    V.col(0) = start;
    Eigen::Index steps = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      Eigen::VectorXd w = apply(V.col(j));
      alpha(j) = V.col(j).dot(w);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        w -= V.leftCols(j + 1) * (V.leftCols(j + 1).transpose() * w);
      }
      steps = j + 1;
      const double b = w.norm();
      beta(j) = b;
      if (j + 1 == m) break;
      if (b <= 1e-13 * std::max(1.0, std::abs(alpha(j)))) break;
      V.col(j + 1) = w / b;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    Eigen::VectorXd diag = alpha.head(steps);
    Eigen::VectorXd sub = beta.head(std::max<Eigen::Index>(steps - 1, 0));
    if (steps == 1) {
      tri.computeFromTridiagonal(diag, Eigen::VectorXd(0), Eigen::ComputeEigenvectors);
    } else {
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    }
    Eigen::VectorXd u = V.leftCols(steps) * tri.eigenvectors().col(steps - 1);
    u.normalize();

    const Eigen::VectorXd Gu = apply(u);
    const double rayleigh = u.dot(Gu);
    const double residual = (Gu - rayleigh * u).norm() / scale;
    const double lambda = (rayleigh - n) / scale;
    best = std::max(best, lambda);

    const double bound = tol * std::max(1.0, std::abs(lambda));
    if (previous && std::abs(lambda - *previous) <= bound && residual <= bound) {
      return {lambda, products, residual};
    }
    previous = lambda;
    start = u;
  }
  throw ConvergenceError("matrix-free lambda_max did not converge within " +
                             std::to_string(max_iter) + " products",
                         best, products);
}

double SemicircleRef::density(double x) {
  if (std::abs(x) > 1.0) return 0.0;
  return 2.0 / M_PI * std::sqrt(1.0 - x * x);
}

double SemicircleRef::cdf(double x) {
  if (x <= -1.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return 0.5 + (x * std::sqrt(1.0 - x * x) + std::asin(x)) / M_PI;
}

double SemicircleRef::quantile(double u) {
  if (u <= 0.0) return -1.0;
  if (u >= 1.0) return 1.0;
  double lo = -1.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (cdf(mid) < u ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Esd::Esd(std::vector<double> sorted_eigenvalues) : eig_(std::move(sorted_eigenvalues)) {
  if (eig_.empty()) throw ValidationError("ESD of an empty spectrum");
  if (!std::is_sorted(eig_.begin(), eig_.end())) {
    throw ValidationError("ESD input must be sorted ascending");
  }
}

Esd::Esd(const Eigen::VectorXd& sorted_eigenvalues)
    : Esd(std::vector<double>(sorted_eigenvalues.begin(), sorted_eigenvalues.end())) {}

std::size_t Esd::count_le(double x) const {
  return static_cast<std::size_t>(std::upper_bound(eig_.begin(), eig_.end(), x) - eig_.begin());
}

double Esd::operator()(double x) const {
  return static_cast<double>(count_le(x)) / static_cast<double>(eig_.size());
}

namespace {

void require_sorted(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0) throw ValidationError(std::string(what) + ": empty spectrum");
  if (!std::is_sorted(v.begin(), v.end())) {
    throw ValidationError(std::string(what) + ": eigenvalues must be sorted ascending");
  }
}

}  // namespace

double ks_distance(const Eigen::VectorXd& eig, const SemicircleRef& ref) {
  require_sorted(eig, "ks_distance");
  const double p = static_cast<double>(eig.size());
  double d = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i) {
    const double F = ref.cdf(eig(i));
    const double above = static_cast<double>(i + 1) / p;
    const double below = static_cast<double>(i) / p;
    d = std::max({d, std::abs(above - F), std::abs(below - F)});
  }
  return d;
}

std::size_t esd_sup_count_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ValidationError("esd_sup_diff: spectra differ in length");
  require_sorted(a, "esd_sup_diff");
  require_sorted(b, "esd_sup_diff");
  const Eigen::Index p = a.size();
  Eigen::Index i = 0, j = 0;
  std::size_t worst = 0;
  while (i < p || j < p) {
    double x;
    if (i == p) x = b(j);
    else if (j == p) x = a(i);
    else x = std::min(a(i), b(j));
    while (i < p && a(i) <= x) ++i;
    while (j < p && b(j) <= x) ++j;
    worst = std::max(worst, static_cast<std::size_t>(std::abs(i - j)));
  }
  return worst;
}

double esd_sup_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return static_cast<double>(esd_sup_count_diff(a, b)) / static_cast<double>(a.size());
}

double diag_max_dev(const DataMatrix& X) {
  const Eigen::MatrixXd& e = X.entries();
  const double n = static_cast<double>(e.cols());
  const double norm = std::sqrt(n * static_cast<double>(e.rows()));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    CompensatedSum s;
    for (Eigen::Index j = 0; j < e.cols(); ++j) s += e(i, j) * e(i, j);
    worst = std::max(worst, std::abs(s.value() - n));
  }
  return worst / norm;
}

SpectralSummary summarize_spectrum(const DataMatrix& X, SpectralMethod method, double tol,
                                   long max_iter) {
  SpectralSummary s;
  s.method = method;
  s.diag_max_dev = diag_max_dev(X);
  if (method == SpectralMethod::dense) {
    s.eigenvalues = eigvals_sym(build_A(X));
    s.lambda_max = s.eigenvalues(s.eigenvalues.size() - 1);
    s.ks_to_semicircle = ks_distance(s.eigenvalues);
  } else {
    const auto r = lambda_max_matfree(X, tol, max_iter);
    s.lambda_max = r.lambda_max;
    s.iterations = r.iterations;
  }
  return s;
}

std::string to_json(const SpectralSummary& s) {
  nlohmann::ordered_json j;
  j["method"] = s.method == SpectralMethod::dense ? "dense" : "matfree";
  j["lambda_max"] = s.lambda_max;
  j["ks_to_semicircle"] = s.ks_to_semicircle ? nlohmann::ordered_json(*s.ks_to_semicircle)
                                             : nlohmann::ordered_json(nullptr);
  j["diag_max_dev"] = s.diag_max_dev;
  j["iterations"] = s.iterations;
  j["eigenvalues"] = std::vector<double>(s.eigenvalues.begin(), s.eigenvalues.end());
  return j.dump(2);
}

void write_spectrum_csv(std::ostream& out, const Eigen::VectorXd& eigenvalues) {
  out << "index,eigenvalue\n";
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    out << (i + 1) << ',' << io::format_double(eigenvalues(i)) << '\n';
  }
}

}  // namespace lmax
