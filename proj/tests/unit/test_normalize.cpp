#include <doctest.h>

#include <cmath>
#include <random>

#include "lmax/ensemble.hpp"
#include "lmax/errors.hpp"
#include "lmax/normalize.hpp"
#include "oracles.hpp"

using namespace lmax;

namespace {

DataMatrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd M(rows.size(), rows.begin()->size());
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) M(i, j++) = v;
    ++i;
  }
  return DataMatrix::from_values(M);
}

DataMatrix random_matrix(int p, int n, std::uint64_t seed,
                         const DistributionSpec& spec = DistributionSpec::gaussian()) {
  return sample_matrix(spec, MatrixShape(p, n), SeedSpec{seed}, 0);
}

double max_abs(const Eigen::MatrixXd& M) { return M.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("normalize") {
  TEST_CASE("build_A small cases") {
    CHECK(build_A(mat({{0}}))(0, 0) == -0.5);
    CHECK(build_A(mat({{1, 1, 1, 1}}))(0, 0) == 0.0);
    const auto A = build_A(mat({{1, -1, 1}, {1, 1, -1}}));
    const Eigen::MatrixXd X = mat({{1, -1, 1}, {1, 1, -1}}).entries();
    Eigen::MatrixXd ref = oracle::gram_loops(X);
    ref.diagonal().array() -= 3.0;
    ref /= 2.0 * std::sqrt(6.0);
    CHECK(max_abs(A - ref) == 0.0);
    CHECK(A(0, 1) == doctest::Approx(-1.0 / (2.0 * std::sqrt(6.0))));
  }

  TEST_CASE("build_A agrees with the loop product and is exactly symmetric") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
      const int p = 1 + rng() % 12, n = 1 + rng() % 40;
      const auto X = random_matrix(p, n, trial);
      const auto A = build_A(X);
      Eigen::MatrixXd ref = oracle::gram_loops(X.entries());
      ref.diagonal().array() -= n;
      ref /= 2.0 * std::sqrt(double(n) * p);
      CHECK(max_abs(A - ref) <= 1e-12 * std::max(1.0, max_abs(ref)));
      CHECK(A == A.transpose());
    }
  }

  TEST_CASE("zero data gives -(1/2) sqrt(n/p) I") {
    const auto A = build_A(DataMatrix::from_values(Eigen::MatrixXd::Zero(4, 9)));
    CHECK(max_abs(A + 0.5 * std::sqrt(9.0 / 4.0) * Eigen::MatrixXd::Identity(4, 4)) < 1e-15);
  }

  TEST_CASE("build_B zeroes the diagonal only") {
    const auto X = random_matrix(3, 5, 1);
    const auto A = build_A(X), B = build_B(X);
    CHECK(B.diagonal().isZero(0));
    Eigen::MatrixXd D = A - B;
    for (int i = 0; i < 3; ++i) {
      const double expect = (X.entries().row(i).squaredNorm() - 5.0) / (2.0 * std::sqrt(15.0));
      CHECK(D(i, i) == doctest::Approx(expect).epsilon(1e-13));
      for (int j = 0; j < 3; ++j)
        if (i != j) CHECK(D(i, j) == 0.0);
    }
    CHECK(build_B(random_matrix(1, 7, 2))(0, 0) == 0.0);
  }

  TEST_CASE("build_S1 against the definitional sum") {
    CHECK(build_S1(mat({{1, -1}}))(0, 0) == 1.0);
    CHECK(max_abs(build_S1(mat({{2, 2, 2}, {-1, -1, -1}}))) < 1e-15);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto X = random_matrix(3, 6, seed);
      CHECK(max_abs(build_S1(X) - oracle::centered_cov_loops(X.entries())) < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(build_S1(X));
      CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
  }

  TEST_CASE("A - A1 is the rank-one mean term") {
    CHECK(build_A1(mat({{3, 3, 3, 3}}))(0, 0) == doctest::Approx(-1.0));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto X = random_matrix(5, 30, seed);
      const Eigen::VectorXd mean = X.entries().rowwise().mean();
      const Eigen::MatrixXd diff = build_A(X) - build_A1(X);
      const Eigen::MatrixXd expect = 0.5 * std::sqrt(30.0 / 5.0) * mean * mean.transpose();
      CHECK(max_abs(diff - expect) < 1e-12);
    }
    // Columns in +/- pairs give a zero mean.
    Eigen::MatrixXd M(2, 4);
    M << 1, -1, 2, -2, 0.5, -0.5, 3, -3;
    const auto X = DataMatrix::from_values(M);
    CHECK(max_abs(build_A(X) - build_A1(X)) < 1e-15);
  }

  TEST_CASE("expression templates work for float and for blocks") {
    Eigen::MatrixXf Xf = Eigen::MatrixXf::Random(4, 10);
    const Mat<float> Af = build_A(Xf);
    const Eigen::MatrixXd Ad = build_A(Xf.cast<double>().eval());
    CHECK((Af.cast<double>() - Ad).cwiseAbs().maxCoeff() < 1e-5);
    Eigen::MatrixXd big = Eigen::MatrixXd::Random(6, 20);
    const Eigen::MatrixXd blockA = build_A(big.topLeftCorner(3, 12));
    const Eigen::MatrixXd copyA = build_A(Eigen::MatrixXd(big.topLeftCorner(3, 12)));
    CHECK(blockA == copyA);
  }

  TEST_CASE("default delta schedule") {
    CHECK(default_delta(MatrixShape(1 << 28, 1 << 28)) == std::ldexp(1.0, -7));
    CHECK(default_delta(MatrixShape(10000, 10000)) == doctest::Approx(0.1).epsilon(1e-14));
    CHECK(truncation_threshold(MatrixShape(10000, 10000), 0.1) == doctest::Approx(10.0).epsilon(1e-14));
    double prev_d = 1e9, prev_t = 0;
    for (std::int64_t n : {10, 100, 1000, 10000}) {
      const MatrixShape s(50, n);
      const double d = default_delta(s);
      CHECK(d < prev_d);
      CHECK(truncation_threshold(s, d) > prev_t);
      prev_d = d;
      prev_t = truncation_threshold(s, d);
    }
    NormalizationParams bad{0.0};
    CHECK_THROWS_AS(bad.delta_for(MatrixShape(10, 10)), ValidationError);
    NormalizationParams tiny{0.1};  // threshold 0.1 * 100^(1/4) < 1
    CHECK_THROWS_AS(tiny.delta_for(MatrixShape(10, 10)), ValidationError);
  }

  TEST_CASE("truncation replaces by zero") {
    const auto [out, rep] = truncate_at(mat({{10, 0.1}}), 1.0);
    CHECK(out.entries()(0, 0) == 0.0);
    CHECK(out.entries()(0, 1) == 0.1);
    CHECK(rep.fraction_truncated == 0.5);

    const auto X = random_matrix(20, 50, 4);
    const auto [same, r0] = truncate_at(X, 100.0);
    CHECK(same.entries() == X.entries());
    CHECK(r0.fraction_truncated == 0.0);

    const auto [once, r1] = truncate(X, 0.5);
    const auto [twice, r2] = truncate(once, 0.5);
    CHECK(once.entries() == twice.entries());
    CHECK(r2.fraction_truncated == 0.0);
    CHECK(r1.threshold == doctest::Approx(0.5 * std::pow(1000.0, 0.25)));
  }

  TEST_CASE("gaussian default truncation barely cuts") {
    const auto X = random_matrix(200, 20000, 8);
    const auto [out, rep] = truncate(X, default_delta(X.shape()));
    CHECK(rep.threshold == doctest::Approx(std::pow(4e6, 0.125)));
    CHECK(rep.fraction_truncated <= 1e-6);
  }

  TEST_CASE("empirical recentering is exact") {
    const auto r = recenter_rescale(mat({{1, 3}}), RecenterMode::empirical);
    CHECK(r.matrix.entries()(0, 0) == -1.0);
    CHECK(r.matrix.entries()(0, 1) == 1.0);
    CHECK(r.center == 2.0);
    CHECK_THROWS_AS(recenter_rescale(mat({{2, 2, 2}}), RecenterMode::empirical),
                    DegenerateInputError);
    CHECK_THROWS_AS(recenter_rescale(mat({{2, 1}}), RecenterMode::population), ValidationError);

    const auto X = random_matrix(30, 400, 5, DistributionSpec::student_t(3.0));
    const auto [out, rep] = normalize_entries(X, {});
    CHECK(std::abs(rep.post_mean) < 1e-15);
    CHECK(std::abs(rep.post_sigma2 - 1.0) < 1e-14);
    CHECK(std::abs(out.entries().mean()) < 1e-15);
  }

  TEST_CASE("truncated population moments against Simpson") {
    struct Case {
      DistributionSpec spec;
      double t;
    };
    const std::vector<Case> cases = {
        {DistributionSpec::gaussian(), 6.7},        {DistributionSpec::gaussian(), 1.0},
        {DistributionSpec::student_t(5.0), 6.69},   {DistributionSpec::student_t(5.0), 1.5},
        {DistributionSpec::student_t(3.5), 3.0},    {DistributionSpec::centered_exponential(), 0.5},
        {DistributionSpec::centered_exponential(), 4.0}, {DistributionSpec::uniform_symmetric(), 1.2},
    };
    for (const auto& c : cases) {
      CAPTURE(c.spec.name());
      CAPTURE(c.t);
      auto f = [&](double x) { return standardized_pdf(c.spec, x); };
      // Density kinks at -1 (exponential) are split out of the panel.
      double m1 = 0, m2 = 0;
      std::vector<double> cuts = {-c.t, c.t};
      if (c.spec.kind == DistributionKind::centered_exponential && c.t > 1) cuts = {-1.0, c.t};
      m1 = oracle::simpson([&](double x) { return x * f(x); }, cuts[0], cuts[1], 400000);
      m2 = oracle::simpson([&](double x) { return x * x * f(x); }, cuts[0], cuts[1], 400000);
      const auto tm = truncated_population_moments(c.spec, c.t);
      CHECK(tm.mean == doctest::Approx(m1).epsilon(1e-9).scale(1));
      CHECK(tm.variance == doctest::Approx(m2 - m1 * m1).epsilon(1e-9));
    }
    const auto g = truncated_population_moments(DistributionSpec::gaussian(), 6.7);
    CHECK(std::abs(g.mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(g.variance) - 1.0) <= 1e-9);
    const auto rad = truncated_population_moments(DistributionSpec::rademacher(), 0.5);
    CHECK(rad.mean == 0.0);
    CHECK(rad.variance == 0.0);
    const auto tp = truncated_population_moments(DistributionSpec::two_point(1.0, 0.2), 1.0);
    CHECK(tp.mean == doctest::Approx(0.8 * -0.5));
  }

  TEST_CASE("population mode uses the law of the sample") {
    const auto X = random_matrix(50, 2000, 6, DistributionSpec::student_t(5.0));
    NormalizationParams params;
    params.recenter_mode = RecenterMode::population;
    const auto [out, rep] = normalize_entries(X, params);
    const auto tm = truncated_population_moments(DistributionSpec::student_t(5.0), rep.threshold);
    CHECK(rep.center == tm.mean);
    CHECK(rep.sigma2 == tm.variance);
    CHECK(std::abs(rep.post_mean) < 0.01);
  }

  TEST_CASE("covariance specs") {
    CHECK(CovarianceSpec::identity().materialize(3) == Eigen::MatrixXd::Identity(3, 3));
    const auto T = CovarianceSpec::toeplitz(0.5).materialize(4);
    CHECK(T(0, 3) == 0.125);
    CHECK(T(2, 1) == 0.5);
    CHECK_THROWS_AS(CovarianceSpec::toeplitz(1.0).materialize(3), ValidationError);
    CHECK_THROWS_AS(CovarianceSpec::diagonal({1, 2}).materialize(3), ValidationError);
    CHECK_THROWS_AS(CovarianceSpec::diagonal({1, -2}).materialize(2), ValidationError);
    Eigen::MatrixXd asym(2, 2);
    asym << 1, 0.2, 0.1, 1;
    CHECK_THROWS_AS(CovarianceSpec::explicit_matrix(asym).materialize(2), ValidationError);
    Eigen::MatrixXd indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(sqrt_psd(CovarianceSpec::explicit_matrix(indefinite), 2), ValidationError);
  }

  TEST_CASE("sqrt_psd round trips") {
    CHECK(sqrt_psd(CovarianceSpec::identity(), 3) == Eigen::MatrixXd::Identity(3, 3));
    const auto D = sqrt_psd(CovarianceSpec::diagonal({4, 9}), 2);
    CHECK(D(0, 0) == 2.0);
    CHECK(D(1, 1) == 3.0);
    CHECK(D(0, 1) == 0.0);
    for (int p : {3, 10, 40}) {
      const auto spec = CovarianceSpec::toeplitz(0.5);
      const Eigen::MatrixXd S = spec.materialize(p);
      const Eigen::MatrixXd R = sqrt_psd(spec, p);
      CHECK(spectral_norm_sym(R * R - S) <= 1e-10 * spectral_norm_sym(S));
    }
  }

  TEST_CASE("build_S2 against the per-sample definition") {
    const auto X = random_matrix(3, 8, 12);
    CHECK(build_S2(X, CovarianceSpec::identity()) == build_S1(X));
    const auto spec = CovarianceSpec::toeplitz(0.5);
    const Eigen::MatrixXd R = sqrt_psd(spec, 3);
    const Eigen::MatrixXd Y = R * X.entries();
    CHECK(max_abs(build_S2(X, spec) - oracle::centered_cov_loops(Y)) < 1e-12);
    const auto same = DataMatrix::from_values(Eigen::MatrixXd::Constant(3, 5, 1.5));
    CHECK(max_abs(build_S2(same, spec)) < 1e-14);
  }

  TEST_CASE("norm factorization holds on random samples") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto X = random_matrix(8, 60, seed, DistributionSpec::centered_exponential());
      for (const auto& spec : {CovarianceSpec::toeplitz(0.7), CovarianceSpec::diagonal({1, 2, 3, 4, 5, 6, 7, 0}),
                               CovarianceSpec::identity()}) {
        const Eigen::MatrixXd Sigma = spec.materialize(8);
        const double lhs = spectral_norm_sym(build_S2(X, spec) - Sigma);
        const double rhs = spectral_norm_sym(build_S1(X) - Eigen::MatrixXd::Identity(8, 8)) *
                           spectral_norm_sym(Sigma);
        CHECK(lhs <= rhs + 1e-10);
      }
    }
  }
}
