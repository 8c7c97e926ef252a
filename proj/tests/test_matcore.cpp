#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cpsguard/errors.hpp"
#include "cpsguard/matcore.hpp"
#include "cpsguard/rng.hpp"

using namespace cpsguard;

namespace {

Mat random_mat(std::size_t r, std::size_t c, RngStream& rng, double lo = -1.0, double hi = 1.0) {
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = lo + (hi - lo) * rng.uniform();
    return m;
}

Mat random_spd(std::size_t n, RngStream& rng) {
    const Mat g = random_mat(n, n, rng);
    return g * g.transpose() + Mat::identity(n) * 0.1;
}

Mat random_stable(std::size_t n, RngStream& rng, double radius = 0.9) {
    Mat a = random_mat(n, n, rng);
    // Scale by an upper bound on the spectral radius (Frobenius norm).
    return a * (radius / a.frobenius_norm());
}

} // namespace

TEST_CASE("construction rejects inconsistent or non-finite entries") {
    CHECK_THROWS_AS(Mat(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Mat(1, 1, std::vector<double>{std::nan("")}), InvalidInputError);
    CHECK_THROWS_AS(Mat(1, 1, std::vector<double>{INFINITY}), InvalidInputError);
}

TEST_CASE("products and stacking") {
    const Mat a{{1, 2}, {3, 4}};
    const Mat b{{0, 1}, {1, 0}};
    CHECK(a * b == Mat{{2, 1}, {4, 3}});
    CHECK(a.transpose() == Mat{{1, 3}, {2, 4}});
    CHECK(hstack({a, b}).cols() == 4);
    CHECK(vstack({a, b}).rows() == 4);
    CHECK(block_diag({a, b})(2, 3) == 1.0);
    CHECK(quad_form(Mat::column({1, 1}), a) == doctest::Approx(10.0));
    CHECK_THROWS_AS(a * Mat(3, 1), DimensionError);
}

TEST_CASE("sym_eig small cases") {
    SUBCASE("identity") {
        const auto e = sym_eig(Mat::identity(3));
        for (double v : e.eigenvalues) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("diagonal, ascending with axis vectors") {
        const auto e = sym_eig(Mat::diag({3.0, -1.0}));
        CHECK(e.eigenvalues[0] == doctest::Approx(-1.0));
        CHECK(e.eigenvalues[1] == doctest::Approx(3.0));
        CHECK(std::abs(e.eigenvectors(1, 0)) == doctest::Approx(1.0));
        CHECK(std::abs(e.eigenvectors(0, 1)) == doctest::Approx(1.0));
    }
    SUBCASE("2x2 closed form") {
        const double a = 2, b = 1, c = 2;
        const double disc = std::sqrt((a - c) * (a - c) + 4 * b * b);
        const auto e = sym_eig(Mat{{a, b}, {b, c}});
        CHECK(e.eigenvalues[0] == doctest::Approx((a + c - disc) / 2).epsilon(1e-14));
        CHECK(e.eigenvalues[1] == doctest::Approx((a + c + disc) / 2).epsilon(1e-14));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(sym_eig(Mat(2, 3)), DimensionError);
    }
}

TEST_CASE("sym_eig reconstruction and orthonormality on random matrices") {
    RngStream rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 24);
        const Mat m = symmetrize(random_mat(n, n, rng, -10, 10));
        const auto e = sym_eig(m);
        Mat lam = Mat::diag(std::span<const double>(e.eigenvalues));
        const Mat rec = e.eigenvectors * lam * e.eigenvectors.transpose();
        CHECK((rec - m).frobenius_norm() <= 1e-9 * m.frobenius_norm());
        const Mat vtv = e.eigenvectors.transpose() * e.eigenvectors;
        CHECK((vtv - Mat::identity(n)).frobenius_norm() <= 1e-9);
        for (std::size_t i = 1; i < n; ++i) CHECK(e.eigenvalues[i - 1] <= e.eigenvalues[i]);
    }
}

TEST_CASE("is_psd") {
    CHECK(is_psd(Mat::identity(3), 1e-9));
    CHECK_FALSE(is_psd(Mat::diag({1.0, -1e-3}), 1e-9));
    CHECK(is_psd(Mat(3, 3), 1e-9));
}

TEST_CASE("cholesky, solve and inverse") {
    RngStream rng(5);
    const Mat s = random_spd(5, rng);
    const Mat l = cholesky(s);
    CHECK((l * l.transpose() - s).frobenius_norm() < 1e-12 * s.frobenius_norm());
    const Mat rhs = random_mat(5, 2, rng);
    CHECK((s * solve(s, rhs) - rhs).frobenius_norm() < 1e-10);
    const Mat g = random_mat(5, 5, rng);  // general, LU path
    CHECK((g * solve(g, rhs) - rhs).frobenius_norm() < 1e-9);
    CHECK((g * inverse(g) - Mat::identity(5)).frobenius_norm() < 1e-9);
    CHECK_THROWS_AS(cholesky(Mat::diag({1.0, -1.0})), DomainError);
    CHECK_THROWS_AS(solve(Mat(2, 2), Mat(2, 1)), DomainError);
}

TEST_CASE("solve_dlyap") {
    SUBCASE("zero dynamics gives Q") {
        const Mat q{{2, 1}, {1, 3}};
        CHECK((solve_dlyap(Mat(2, 2), q) - q).frobenius_norm() < 1e-15);
    }
    SUBCASE("scalar geometric series") {
        CHECK(solve_dlyap(Mat{{0.5}}, Mat{{1.0}})(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    }
    SUBCASE("random stable residual, symmetry, PSD") {
        RngStream rng(7);
        for (int t = 0; t < 20; ++t) {
            const Mat a = random_stable(4, rng, 0.95);
            const Mat g = random_mat(4, 2, rng);
            const Mat q = g * g.transpose();
            const Mat x = solve_dlyap(a, q);
            CHECK((x - a * x * a.transpose() - q).frobenius_norm() < 1e-9 * x.frobenius_norm());
            CHECK(asymmetry(x) < 1e-12);
            CHECK(min_eigenvalue(x) >= -1e-9);
        }
    }
    SUBCASE("unstable input") {
        CHECK_THROWS_AS(solve_dlyap(Mat{{1.0}}, Mat{{1.0}}), InstabilityError);
    }
}

TEST_CASE("Riccati solvers") {
    SUBCASE("scalar filter with a = 0") {
        CHECK(solve_filter_dare(Mat{{0.0}}, Mat{{1.0}}, Mat{{1.0}}, Mat{{1.0}})(0, 0) == doctest::Approx(1.0));
    }
    SUBCASE("scalar control, positive root of the quadratic") {
        // Clearing (s + 1) in s = 0.81 s + 1 - 0.81 s^2 / (s + 1) gives s^2 - 0.81 s - 1 = 0.
        const double s_expected = (0.81 + std::sqrt(0.81 * 0.81 + 4.0)) / 2.0;
        const double s = solve_dare(Mat{{0.9}}, Mat{{1.0}}, Mat{{1.0}}, Mat{{1.0}})(0, 0);
        CHECK(s == doctest::Approx(s_expected).epsilon(1e-10));
        CHECK(std::abs(s - (0.81 * s + 1 - 0.81 * s * s / (s + 1))) < 1e-10);
    }
    SUBCASE("stationarity on random systems") {
        RngStream rng(3);
        for (int t = 0; t < 10; ++t) {
            const Mat a = random_mat(4, 4, rng) * 0.6;
            const Mat b = random_mat(4, 2, rng);
            const Mat c = random_mat(2, 4, rng);
            const Mat w = Mat::identity(4), v = Mat::identity(2);
            const Mat s = solve_dare(a, b, w, v);
            CHECK((dare_step(s, a, b, w, v) - s).frobenius_norm() < 1e-10);
            CHECK(min_eigenvalue(s) >= -1e-9);
            const Mat p = solve_filter_dare(a, c, w, v);
            CHECK((filter_dare_step(p, a, c, w, v) - p).frobenius_norm() < 1e-10);
        }
    }
}

TEST_CASE("logdet") {
    CHECK(logdet(Mat::identity(4)) == doctest::Approx(0.0));
    CHECK(logdet(Mat::diag({std::exp(1.0), std::exp(1.0)})) == doctest::Approx(2.0));
    CHECK(logdet(Mat{{2, 1}, {1, 2}}) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK_THROWS_AS(logdet(Mat::diag({1.0, 0.0})), DomainError);
    RngStream rng(9);
    for (int t = 0; t < 20; ++t) {
        const Mat s = random_spd(4, rng);
        CHECK(std::abs(logdet(s) + logdet(inverse(s))) < 1e-8);
    }
}

TEST_CASE("square roots and spectral radius") {
    RngStream rng(13);
    const Mat s = random_spd(4, rng);
    const Mat r = sqrtm_spd(s);
    CHECK((r * r - s).frobenius_norm() < 1e-10 * s.frobenius_norm());
    CHECK((inv_sqrtm_spd(s) * r - Mat::identity(4)).frobenius_norm() < 1e-9);
    const Mat a = Mat{{0.5, 10.0}, {0.0, 0.4}};
    const double rho = spectral_radius_estimate(a);
    CHECK(rho >= 0.5 - 1e-12);
    CHECK(rho < 0.52);
}

TEST_CASE("expm against closed forms") {
    const Mat z = expm(Mat::diag({1.0, -2.0}));
    CHECK(z(0, 0) == doctest::Approx(std::exp(1.0)).epsilon(1e-14));
    CHECK(z(1, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    // Nilpotent: exp([[0,1],[0,0]]) = [[1,1],[0,1]].
    const Mat n = expm(Mat{{0.0, 1.0}, {0.0, 0.0}});
    CHECK((n - Mat{{1, 1}, {0, 1}}).max_abs() < 1e-15);
    // Rotation generator.
    const double t = 3.0;
    const Mat rot = expm(Mat{{0.0, -t}, {t, 0.0}});
    CHECK(rot(0, 0) == doctest::Approx(std::cos(t)).epsilon(1e-13));
    CHECK(rot(1, 0) == doctest::Approx(std::sin(t)).epsilon(1e-13));
}
