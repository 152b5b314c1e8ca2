#include "lmax/ensemble.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "lmax/errors.hpp"
#include "lmax/numeric.hpp"

namespace lmax {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kUnboundedOrder = 1 << 20;

// Support points of the standardized two-point law: `hi` with probability q.
struct TwoPointSupport {
  double hi;
  double lo;
};

TwoPointSupport two_point_support(const DistributionSpec& spec) {
  const double sign = spec.a > 0 ? 1.0 : -1.0;
  return {sign * std::sqrt((1.0 - spec.q) / spec.q), -sign * std::sqrt(spec.q / (1.0 - spec.q))};
}

double student_scale(double df) { return std::sqrt((df - 2.0) / df); }

}  // namespace

void DistributionSpec::validate() const {
  switch (kind) {
    case DistributionKind::student_t:
      if (!(std::isfinite(df) && df > 2.0)) {
        throw ParameterError("student-t requires finite df > 2, got " + std::to_string(df));
      }
      break;
    case DistributionKind::two_point:
      if (!(std::isfinite(a) && a != 0.0)) {
        throw ParameterError("two-point requires a finite nonzero support value a");
      }
      if (!(q > 0.0 && q < 1.0)) {
        throw ParameterError("two-point weights q and 1-q must both lie in (0, 1)");
      }
      break;
    default:
      break;
  }
}

std::string DistributionSpec::name() const {
  switch (kind) {
    case DistributionKind::gaussian: return "gaussian";
    case DistributionKind::rademacher: return "rademacher";
    case DistributionKind::uniform_symmetric: return "uniform-symmetric";
    case DistributionKind::centered_exponential: return "centered-exponential";
    case DistributionKind::student_t: return "student-t";
    case DistributionKind::two_point: return "two-point";
  }
  return "unknown";
}

std::vector<double> moment_sequence(const DistributionSpec& spec, int order) {
  spec.validate();
  if (order < 0) throw ParameterError("moment order must be nonnegative");
  std::vector<double> m(static_cast<std::size_t>(order));
  for (int s = 1; s <= order; ++s) {
    double v = 0.0;
    const bool even = s % 2 == 0;
    switch (spec.kind) {
      case DistributionKind::gaussian:
        if (even) {
          v = 1.0;
          for (int q = s - 1; q > 1; q -= 2) v *= q;
        }
        break;
      case DistributionKind::rademacher:
        v = even ? 1.0 : 0.0;
        break;
      case DistributionKind::uniform_symmetric:
        v = even ? std::pow(3.0, s / 2) / (s + 1) : 0.0;
        break;
      case DistributionKind::centered_exponential: {
        // E(E - 1)^s is the subfactorial !s.
        double d0 = 1.0, d1 = 0.0;
        for (int q = 2; q <= s; ++q) {
          const double d2 = (q - 1) * (d1 + d0);
          d0 = d1;
          d1 = d2;
        }
        v = s == 0 ? 1.0 : d1;
        break;
      }
      case DistributionKind::student_t:
        if (static_cast<double>(s) >= spec.df) {
          v = even ? kInf : kNaN;
        } else if (even) {
          v = 1.0;
          for (int i = 1; i <= s / 2; ++i) v *= (spec.df - 2.0) * (2 * i - 1) / (spec.df - 2 * i);
        }
        break;
      case DistributionKind::two_point: {
        const auto sp = two_point_support(spec);
        v = spec.q * std::pow(sp.hi, s) + (1.0 - spec.q) * std::pow(sp.lo, s);
        break;
      }
    }
    m[static_cast<std::size_t>(s - 1)] = v;
  }
  // Standardization is exact by construction; don't let pow() rounding leak in.
  if (order >= 1) m[0] = 0.0;
  if (order >= 2) m[1] = 1.0;
  return m;
}

int finite_moment_order(const DistributionSpec& spec) {
  spec.validate();
  if (spec.kind == DistributionKind::student_t) {
    return static_cast<int>(std::ceil(spec.df)) - 1;
  }
  return kUnboundedOrder;
}

StandardizedMoments standardized_moments(const DistributionSpec& spec) {
  const auto m = moment_sequence(spec, 4);
  StandardizedMoments out;
  out.m1 = m[0];
  out.m2 = m[1];
  out.m3 = m[2];
  out.m4 = m[3];
  out.m4_finite = std::isfinite(out.m4);
  return out;
}

bool is_discrete(const DistributionSpec& spec) {
  return spec.kind == DistributionKind::rademacher || spec.kind == DistributionKind::two_point;
}

double standardized_pdf(const DistributionSpec& spec, double x) {
  switch (spec.kind) {
    case DistributionKind::gaussian:
      return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    case DistributionKind::uniform_symmetric:
      return std::abs(x) <= std::sqrt(3.0) ? 1.0 / (2.0 * std::sqrt(3.0)) : 0.0;
    case DistributionKind::centered_exponential:
      return x >= -1.0 ? std::exp(-(x + 1.0)) : 0.0;
    case DistributionKind::student_t: {
      const double nu = spec.df;
      const double s = student_scale(nu);
      const double t = x / s;
      const double log_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                              0.5 * std::log(nu * M_PI);
      return std::exp(log_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu)) / s;
    }
    case DistributionKind::rademacher:
    case DistributionKind::two_point:
      return 0.0;
  }
  return 0.0;
}

MatrixShape::MatrixShape(std::int64_t p_, std::int64_t n_) : p(p_), n(n_) {
  if (p < 1 || n < 1) {
    throw ValidationError("matrix shape requires p >= 1 and n >= 1");
  }
}

double MatrixShape::ratio() const {
  const std::int64_t g = std::gcd(p, n);
  return static_cast<double>(p / g) / static_cast<double>(n / g);
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t SeedSpec::derive(const MatrixShape& shape, std::int64_t replicate) const noexcept {
  std::uint64_t h = mix64(master_seed);
  h = mix64(h ^ static_cast<std::uint64_t>(shape.p));
  h = mix64(h ^ static_cast<std::uint64_t>(shape.n));
  h = mix64(h ^ static_cast<std::uint64_t>(replicate));
  return h;
}

DataMatrix::DataMatrix(Eigen::MatrixXd entries, Provenance provenance)
    : shape_(entries.rows(), entries.cols()),
      entries_(std::move(entries)),
      provenance_(std::move(provenance)) {}

DataMatrix DataMatrix::from_values(Eigen::MatrixXd entries) {
  return DataMatrix(std::move(entries), Provenance{});
}

DataMatrix DataMatrix::with_entries(Eigen::MatrixXd entries) const {
  if (entries.rows() != shape_.p || entries.cols() != shape_.n) {
    throw ValidationError("replacement entries must keep the matrix shape");
  }
  return DataMatrix(std::move(entries), provenance_);
}

DataMatrix sample_matrix(const DistributionSpec& spec, const MatrixShape& shape,
                         const SeedSpec& seed, std::int64_t replicate) {
  spec.validate();
  std::mt19937_64 engine(seed.derive(shape, replicate));

  // Entries are drawn in row-major order from one stream.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(shape.p, shape.n);
  double* out = rows.data();
  const std::int64_t count = shape.entries();

  switch (spec.kind) {
    case DistributionKind::gaussian: {
      std::normal_distribution<double> dist;
      for (std::int64_t t = 0; t < count; ++t) out[t] = dist(engine);
      break;
    }
    case DistributionKind::rademacher:
      for (std::int64_t t = 0; t < count; ++t) out[t] = (engine() >> 63) ? 1.0 : -1.0;
      break;
    case DistributionKind::uniform_symmetric: {
      std::uniform_real_distribution<double> dist(-std::sqrt(3.0), std::sqrt(3.0));
      for (std::int64_t t = 0; t < count; ++t) out[t] = dist(engine);
      break;
    }
    case DistributionKind::centered_exponential: {
      std::exponential_distribution<double> dist(1.0);
      for (std::int64_t t = 0; t < count; ++t) out[t] = dist(engine) - 1.0;
      break;
    }
    case DistributionKind::student_t: {
      std::student_t_distribution<double> dist(spec.df);
      const double s = student_scale(spec.df);
      for (std::int64_t t = 0; t < count; ++t) out[t] = s * dist(engine);
      break;
    }
    case DistributionKind::two_point: {
      const auto sp = two_point_support(spec);
      for (std::int64_t t = 0; t < count; ++t) {
        out[t] = std::generate_canonical<double, 53>(engine) < spec.q ? sp.hi : sp.lo;
      }
      break;
    }
  }

  return DataMatrix(Eigen::MatrixXd(rows), Provenance{spec, seed, replicate});
}

EmpiricalMomentReport empirical_moment_report(const DataMatrix& X) {
  CompensatedSum s1, s2, s3, s4;
  double max_abs = 0.0;
  const Eigen::MatrixXd& e = X.entries();
  for (Eigen::Index j = 0; j < e.cols(); ++j) {
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      const double x = e(i, j);
      const double x2 = x * x;
      s1 += x;
      s2 += x2;
      s3 += x2 * x;
      s4 += x2 * x2;
      max_abs = std::max(max_abs, std::abs(x));
    }
  }
  const double count = static_cast<double>(e.size());
  return {s1.value() / count, s2.value() / count, s3.value() / count, s4.value() / count, max_abs};
}

}  // namespace lmax
