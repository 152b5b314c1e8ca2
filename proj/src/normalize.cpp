#include "lmax/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lmax/numeric.hpp"

namespace lmax {

double default_delta(const MatrixShape& shape) {
  return std::pow(static_cast<double>(shape.p) * static_cast<double>(shape.n), -0.125);
}

double truncation_threshold(const MatrixShape& shape, double delta) {
  return delta * std::pow(static_cast<double>(shape.p) * static_cast<double>(shape.n), 0.25);
}

double NormalizationParams::delta_for(const MatrixShape& shape) const {
  if (!explicit_delta) return default_delta(shape);
  const double delta = *explicit_delta;
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ValidationError("truncation delta must be positive and finite");
  }
  if (!(truncation_threshold(shape, delta) > 1.0)) {
    throw ValidationError("truncation delta * (np)^(1/4) must exceed 1");
  }
  return delta;
}

namespace {

struct MeanVar {
  double mean;
  double var;
};

MeanVar entry_mean_var(const Eigen::MatrixXd& e) {
  const double count = static_cast<double>(e.size());
  CompensatedSum s;
  for (Eigen::Index t = 0; t < e.size(); ++t) s += e.data()[t];
  const double mean = s.value() / count;
  CompensatedSum q;
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    const double d = e.data()[t] - mean;
    q += d * d;
  }
  return {mean, q.value() / count};
}

}  // namespace

std::pair<DataMatrix, TruncationReport> truncate_at(const DataMatrix& X, double threshold) {
  if (!(threshold > 0.0)) throw ValidationError("truncation threshold must be positive");
  Eigen::MatrixXd e = X.entries();
  std::int64_t cut = 0;
  for (Eigen::Index t = 0; t < e.size(); ++t) {
    double& x = e.data()[t];
    if (std::abs(x) > threshold) {
      x = 0.0;
      ++cut;
    }
  }
  TruncationReport report;
  report.threshold = threshold;
  report.fraction_truncated = static_cast<double>(cut) / static_cast<double>(e.size());
  const auto mv = entry_mean_var(e);
  report.center = mv.mean;
  report.sigma2 = mv.var;
  report.post_mean = mv.mean;
  report.post_sigma2 = mv.var;
  return {X.with_entries(std::move(e)), report};
}

std::pair<DataMatrix, TruncationReport> truncate(const DataMatrix& X, double delta) {
  if (!(delta > 0.0)) throw ValidationError("truncation delta must be positive");
  return truncate_at(X, truncation_threshold(X.shape(), delta));
}

TruncatedMoments truncated_population_moments(const DistributionSpec& spec, double threshold) {
  spec.validate();
  if (!(threshold > 0.0)) throw ValidationError("truncation threshold must be positive");
  const double t = threshold;

  if (is_discrete(spec)) {
    // Standardized support points with their probabilities.
    double hi = 1.0, lo = -1.0, q = 0.5;
    if (spec.kind == DistributionKind::two_point) {
      const double sign = spec.a > 0 ? 1.0 : -1.0;
      hi = sign * std::sqrt((1.0 - spec.q) / spec.q);
      lo = -sign * std::sqrt(spec.q / (1.0 - spec.q));
      q = spec.q;
    }
    double m1 = 0.0, m2 = 0.0;
    if (std::abs(hi) <= t) {
      m1 += q * hi;
      m2 += q * hi * hi;
    }
    if (std::abs(lo) <= t) {
      m1 += (1.0 - q) * lo;
      m2 += (1.0 - q) * lo * lo;
    }
    return {m1, m2 - m1 * m1};
  }

  if (spec.kind == DistributionKind::uniform_symmetric) {
    const double edge = std::sqrt(3.0);
    if (t >= edge) return {0.0, 1.0};
    return {0.0, t * t * t / (3.0 * edge)};
  }

  // Remaining kinds are continuous with a smooth density on the tails, so
  // the truncated moments are the full moments minus the two tail integrals.
  boost::math::quadrature::exp_sinh<double> tail;
  const double inf = std::numeric_limits<double>::infinity();
  auto upper = [&](int power) {
    return tail.integrate([&](double x) { return std::pow(x, power) * standardized_pdf(spec, x); },
                          t, inf);
  };
  auto lower = [&](int power) {
    if (spec.kind == DistributionKind::centered_exponential) {
      if (t >= 1.0) return 0.0;
      return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          [&](double x) { return std::pow(x, power) * standardized_pdf(spec, x); }, -1.0, -t, 15,
          1e-14);
    }
    return tail.integrate(
        [&](double x) { return std::pow(-x, power) * standardized_pdf(spec, -x); }, t, inf);
  };

  const double m1 = 0.0 - (upper(1) + lower(1));
  const double m2 = 1.0 - (upper(2) + lower(2));
  return {m1, m2 - m1 * m1};
}

Recentered recenter_rescale(const DataMatrix& Xhat, RecenterMode mode,
                            const std::optional<PopulationModel>& model) {
  double center = 0.0;
  double sigma2 = 1.0;
  if (mode == RecenterMode::empirical) {
    const auto mv = entry_mean_var(Xhat.entries());
    center = mv.mean;
    sigma2 = mv.var;
  } else {
    if (!model) throw ValidationError("population recentering needs the entry distribution");
    const auto tm = truncated_population_moments(model->spec, model->threshold);
    center = tm.mean;
    sigma2 = tm.variance;
  }
  if (!(sigma2 > 0.0)) {
    throw DegenerateInputError("entries have zero variance after truncation");
  }
  const double scale = std::sqrt(sigma2);
  Eigen::MatrixXd out = (Xhat.entries().array() - center) / scale;
  return {Xhat.with_entries(std::move(out)), center, sigma2};
}

std::pair<DataMatrix, TruncationReport> normalize_entries(
    const DataMatrix& X, const NormalizationParams& params,
    const std::optional<DistributionSpec>& spec) {
  const double delta = params.delta_for(X.shape());
  auto [cut, report] = truncate(X, delta);
  std::optional<PopulationModel> model;
  if (params.recenter_mode == RecenterMode::population) {
    const auto& law = spec ? spec : X.provenance().distribution;
    if (!law) throw ValidationError("population recentering needs the entry distribution");
    model = PopulationModel{*law, report.threshold};
  }
  auto rec = recenter_rescale(cut, params.recenter_mode, model);
  report.center = rec.center;
  report.sigma2 = rec.sigma2;
  const auto mv = entry_mean_var(rec.matrix.entries());
  report.post_mean = mv.mean;
  report.post_sigma2 = mv.var;
  return {std::move(rec.matrix), report};
}

std::string CovarianceSpec::kind_name() const {
  switch (kind.index()) {
    case 0: return "identity";
    case 1: return "diagonal";
    case 2: return "toeplitz";
    default: return "explicit";
  }
}

namespace {

constexpr double kPsdTolerance = 1e-10;

void require_symmetric(const Eigen::MatrixXd& M, const char* what) {
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  if ((M - M.transpose()).cwiseAbs().maxCoeff() > kPsdTolerance * scale) {
    throw ValidationError(std::string(what) + " is not symmetric");
  }
}

struct CovarianceMaterializer {
  Eigen::Index p;

  Eigen::MatrixXd operator()(const CovarianceSpec::Identity&) const {
    return Eigen::MatrixXd::Identity(p, p);
  }
  Eigen::MatrixXd operator()(const CovarianceSpec::Diagonal& d) const {
    if (static_cast<Eigen::Index>(d.d.size()) != p) {
      throw ValidationError("diagonal covariance has " + std::to_string(d.d.size()) +
                            " entries, expected " + std::to_string(p));
    }
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const double v = d.d[static_cast<std::size_t>(i)];
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ValidationError("diagonal covariance entries must be finite and nonnegative");
      }
      M(i, i) = v;
    }
    return M;
  }
  Eigen::MatrixXd operator()(const CovarianceSpec::Toeplitz& t) const {
    if (!(t.rho > -1.0 && t.rho < 1.0)) {
      throw ValidationError("toeplitz covariance requires rho in (-1, 1)");
    }
    Eigen::MatrixXd M(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) M(i, j) = std::pow(t.rho, std::abs(i - j));
    }
    return M;
  }
  Eigen::MatrixXd operator()(const CovarianceSpec::Explicit& e) const {
    if (e.matrix.rows() != p || e.matrix.cols() != p) {
      throw ValidationError("explicit covariance is " + std::to_string(e.matrix.rows()) + "x" +
                            std::to_string(e.matrix.cols()) + ", expected " + std::to_string(p) +
                            "x" + std::to_string(p));
    }
    require_symmetric(e.matrix, "explicit covariance");
    return e.matrix;
  }
};

}  // namespace

Eigen::MatrixXd CovarianceSpec::materialize(Eigen::Index p) const {
  if (p < 1) throw ValidationError("covariance dimension must be positive");
  return std::visit(CovarianceMaterializer{p}, kind);
}

Eigen::MatrixXd sqrt_psd(const CovarianceSpec& sigma, Eigen::Index p) {
  if (std::holds_alternative<CovarianceSpec::Identity>(sigma.kind)) {
    return Eigen::MatrixXd::Identity(p, p);
  }
  const Eigen::MatrixXd M = sigma.materialize(p);
  if (const auto* d = std::get_if<CovarianceSpec::Diagonal>(&sigma.kind)) {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const double v = d->d[static_cast<std::size_t>(i)];
      if (v < -kPsdTolerance) throw ValidationError("covariance is not positive semidefinite");
      R(i, i) = std::sqrt(std::max(v, 0.0));
    }
    return R;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
  Eigen::VectorXd lambda = es.eigenvalues();
  if (lambda.minCoeff() < -kPsdTolerance) {
    throw ValidationError("covariance is not positive semidefinite (eigenvalue " +
                          std::to_string(lambda.minCoeff()) + ")");
  }
  const Eigen::VectorXd root = lambda.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd R = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (R + R.transpose());
}

Eigen::MatrixXd build_S2(const DataMatrix& X, const CovarianceSpec& sigma) {
  Eigen::MatrixXd S1 = build_S1(X);
  if (std::holds_alternative<CovarianceSpec::Identity>(sigma.kind)) return S1;
  const Eigen::MatrixXd R = sqrt_psd(sigma, X.p());
  Eigen::MatrixXd S2 = R * S1 * R;
  return 0.5 * (S2 + S2.transpose());
}

double spectral_norm_sym(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace lmax
