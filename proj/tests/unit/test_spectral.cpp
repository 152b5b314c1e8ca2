#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "lmax/ensemble.hpp"
#include "lmax/errors.hpp"
#include "lmax/normalize.hpp"
#include "lmax/spectral.hpp"
#include "oracles.hpp"

using namespace lmax;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

DataMatrix random_matrix(int p, int n, std::uint64_t seed,
                         const DistributionSpec& spec = DistributionSpec::gaussian()) {
  return sample_matrix(spec, MatrixShape(p, n), SeedSpec{seed}, 0);
}

}  // namespace

TEST_SUITE("spectral") {
  TEST_CASE("eigvals_sym small cases") {
    CHECK(eigvals_sym(Eigen::MatrixXd::Identity(3, 3)) == vec({1, 1, 1}));
    Eigen::MatrixXd M(2, 2);
    M << 0, 1, 1, 0;
    const auto e = eigvals_sym(M);
    CHECK(e(0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(e(1) == doctest::Approx(1.0).epsilon(1e-15));
    Eigen::MatrixXd asym(2, 2);
    asym << 0, 1, 1.1, 0;
    CHECK_THROWS_AS(eigvals_sym(asym), ValidationError);
    CHECK_THROWS_AS(eigvals_sym(Eigen::MatrixXd::Zero(2, 3)), ValidationError);
  }

  TEST_CASE("eigvals_sym against the cubic characteristic polynomial") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::Matrix3d A;
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) A(i, j) = A(j, i) = u(rng);
      const auto e = eigvals_sym(Eigen::MatrixXd(A));
      const auto ref = oracle::sym3_eigenvalues(A);
      for (int i = 0; i < 3; ++i) CHECK(e(i) == doctest::Approx(ref[i]).epsilon(1e-8).scale(1));
    }
  }

  TEST_CASE("trace and Frobenius conservation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto A = build_A(random_matrix(40, 300, seed));
      const auto e = eigvals_sym(A);
      CHECK(std::is_sorted(e.data(), e.data() + e.size()));
      CHECK(std::abs(e.sum() - A.trace()) <= 1e-9 * 40);
      CHECK(std::abs(e.squaredNorm() - A.squaredNorm()) <= 1e-9 * 40);
    }
  }

  TEST_CASE("spectral shift identity through singular values") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto X = random_matrix(12, 90, seed, DistributionSpec::uniform_symmetric());
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(X.entries());
      Eigen::VectorXd s2 = svd.singularValues().array().square();
      std::sort(s2.data(), s2.data() + s2.size());
      const Eigen::VectorXd ref = (s2.array() - 90.0) / (2.0 * std::sqrt(90.0 * 12));
      CHECK((eigvals_sym(build_A(X)) - ref).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }

  TEST_CASE("matrix-free trivial cases") {
    const auto one = DataMatrix::from_values(Eigen::MatrixXd::Ones(1, 4));
    CHECK(std::abs(lambda_max_matfree(one).lambda_max) <= 1e-12);
    const auto zero = DataMatrix::from_values(Eigen::MatrixXd::Zero(2, 8));
    CHECK(lambda_max_matfree(zero).lambda_max == doctest::Approx(-1.0).epsilon(1e-12));
  }

  TEST_CASE("matrix-free matches dense and power iteration") {
    std::mt19937 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
      const int p = 2 + rng() % 60, n = 5 + rng() % 600;
      const auto X = random_matrix(p, n, 100 + trial, DistributionSpec::rademacher());
      const auto A = build_A(X);
      const double dense = eigvals_sym(A).maxCoeff();
      const auto mf = lambda_max_matfree(X);
      CHECK(std::abs(mf.lambda_max - dense) <= 1e-8 * std::max(1.0, std::abs(dense)));
      CHECK(mf.iterations > 0);
      if (p <= 20) CHECK(oracle::power_lambda_max(A) == doctest::Approx(dense).epsilon(1e-6));
    }
  }

  TEST_CASE("matrix-free gives up with the best value") {
    const auto X = random_matrix(80, 200, 3);
    try {
      lambda_max_matfree(X, 1e-15, 5);
      FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
      CHECK(e.iterations() >= 5);
      CHECK(std::isfinite(e.best_value()));
    }
  }

  TEST_CASE("semicircle reference") {
    CHECK(semicircle_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(semicircle_cdf(1.0) == 1.0);
    CHECK(semicircle_cdf(-1.0) == 0.0);
    CHECK(semicircle_cdf(5.0) == 1.0);
    CHECK(semicircle_cdf(0.5) == doctest::Approx(0.8045).epsilon(1e-4));
    for (double x : {-0.9, -0.3, 0.2, 0.5, 0.77, 0.99}) {
      CHECK(semicircle_cdf(x) == doctest::Approx(oracle::semicircle_cdf_quadrature(x)).epsilon(1e-6));
      CHECK(SemicircleRef::quantile(semicircle_cdf(x)) == doctest::Approx(x).epsilon(1e-12));
    }
    const double mass = oracle::simpson(SemicircleRef::density, -1, 1, 2000000);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  }

  TEST_CASE("esd counting") {
    const Esd f(vec({1, 2, 3}));
    CHECK(f(2.0) == doctest::Approx(2.0 / 3.0));
    CHECK(f(0.5) == 0.0);
    CHECK(f(3.0) == 1.0);
    CHECK_THROWS_AS(Esd(vec({2, 1})), ValidationError);
    CHECK_THROWS_AS(Esd(std::vector<double>{}), ValidationError);

    std::mt19937_64 rng(4);
    std::normal_distribution<double> z;
    std::vector<double> pts(257);
    for (double& x : pts) x = std::round(z(rng) * 4) / 4;  // ties on purpose
    std::sort(pts.begin(), pts.end());
    const Esd g(pts);
    for (int q = 0; q < 100; ++q) {
      const double x = q % 3 ? z(rng) : pts[q];
      const auto naive = std::count_if(pts.begin(), pts.end(), [&](double v) { return v <= x; });
      CHECK(g.count_le(x) == std::size_t(naive));
    }
  }

  TEST_CASE("ks distance") {
    CHECK(ks_distance(Eigen::VectorXd::Zero(10)) == doctest::Approx(0.5));
    CHECK(ks_distance(vec({1.0})) == 1.0);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 1);
    int passes = 0;
    for (int rep = 0; rep < 20; ++rep) {
      Eigen::VectorXd s(2000);
      for (auto& x : s) x = SemicircleRef::quantile(u(rng));
      std::sort(s.data(), s.data() + s.size());
      passes += ks_distance(s) <= 0.045;
      // Brute-force statistic on a fine grid never exceeds the exact one.
      double grid = 0;
      const Esd f(s);
      for (int g = 0; g <= 4000; ++g) {
        const double x = -1.0 + g / 2000.0;
        grid = std::max(grid, std::abs(f(x) - semicircle_cdf(x)));
      }
      CHECK(grid <= ks_distance(s) + 1e-15);
    }
    CHECK(passes >= 19);
  }

  TEST_CASE("esd sup distance") {
    const auto a = vec({-1, 0, 0.5, 2});
    CHECK(esd_sup_diff(a, a) == 0.0);
    auto b = a;
    b(2) = 1.5;
    CHECK(esd_sup_diff(a, b) == 0.25);
    CHECK(esd_sup_count_diff(a, b) == 1);
    CHECK_THROWS_AS(esd_sup_diff(a, vec({1, 2})), ValidationError);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd x(15), y(15);
      for (int i = 0; i < 15; ++i) {
        x(i) = std::round(z(rng) * 3);
        y(i) = std::round(z(rng) * 3);
      }
      std::sort(x.data(), x.data() + 15);
      std::sort(y.data(), y.data() + 15);
      // Oracle: evaluate both step functions at every jump.
      std::size_t worst = 0;
      for (int i = 0; i < 15; ++i) {
        for (double t : {x(i), y(i)}) {
          const auto cx = std::count_if(x.data(), x.data() + 15, [&](double v) { return v <= t; });
          const auto cy = std::count_if(y.data(), y.data() + 15, [&](double v) { return v <= t; });
          worst = std::max<std::size_t>(worst, std::abs(cx - cy));
        }
      }
      CHECK(esd_sup_count_diff(x, y) == worst);
    }
  }

  TEST_CASE("rank-one update moves the ESD by at most 1/p") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto X = random_matrix(30, 200, seed, DistributionSpec::centered_exponential());
      const auto ea = eigvals_sym(build_A(X));
      const auto e1 = eigvals_sym(build_A1(X));
      CHECK(esd_sup_count_diff(ea, e1) <= 1);
      CHECK(e1.maxCoeff() <= ea.maxCoeff() + 1e-10);
    }
  }

  TEST_CASE("diagonal deviation") {
    CHECK(diag_max_dev(DataMatrix::from_values(Eigen::MatrixXd::Constant(1, 1, 2.0))) == 3.0);
    CHECK(diag_max_dev(random_matrix(20, 300, 1, DistributionSpec::rademacher())) == 0.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto X = random_matrix(25, 400, seed);
      const auto A = build_A(X);
      CHECK(diag_max_dev(X) == doctest::Approx(2.0 * A.diagonal().cwiseAbs().maxCoeff()).epsilon(1e-12));
      // Weyl: the diagonal part moves lambda_max by at most its norm.
      const double la = eigvals_sym(A).maxCoeff();
      const double lb = eigvals_sym(build_B(X)).maxCoeff();
      CHECK(std::abs(la - lb) <= diag_max_dev(X) / 2 + 1e-10);
    }
  }

  TEST_CASE("summary and export") {
    const auto X = random_matrix(10, 100, 7);
    const auto s = summarize_spectrum(X, SpectralMethod::dense);
    CHECK(s.eigenvalues.size() == 10);
    CHECK(s.lambda_max == s.eigenvalues(9));
    REQUIRE(s.ks_to_semicircle.has_value());
    CHECK(*s.ks_to_semicircle >= 0.0);
    CHECK(*s.ks_to_semicircle <= 1.0);
    CHECK(Esd(s.eigenvalues)(s.lambda_max) == 1.0);
    const auto m = summarize_spectrum(X, SpectralMethod::matfree);
    CHECK(m.eigenvalues.size() == 0);
    CHECK(m.lambda_max == doctest::Approx(s.lambda_max).epsilon(1e-9));

    std::ostringstream out;
    write_spectrum_csv(out, vec({-0.5, 0.25}));
    CHECK(out.str() == "index,eigenvalue\n1,-0.5\n2,0.25\n");
    CHECK(to_json(s).find("\"lambda_max\"") != std::string::npos);
  }

  TEST_CASE("ks is order invariant after sorting") {
    Eigen::VectorXd e = eigvals_sym(build_A(random_matrix(50, 500, 3)));
    Eigen::VectorXd shuffled = e.reverse();
    std::sort(shuffled.data(), shuffled.data() + shuffled.size());
    CHECK(ks_distance(shuffled) == ks_distance(e));
  }
}
