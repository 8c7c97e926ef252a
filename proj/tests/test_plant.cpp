#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "cpsguard/errors.hpp"
#include "cpsguard/plant.hpp"
#include "cpsguard/rng.hpp"

using namespace cpsguard;

namespace {

PlantModel scalar_model() {
    PlantModel m;
    m.A = Mat{{0.0}};
    m.B = Mat{{1.0}};
    m.C = Mat{{1.0}};
    m.Q = Mat{{1.0}};
    m.R = Mat{{1.0}};
    m.U = Mat{{1.0}};
    return m;
}

Mat random_mat(std::size_t r, std::size_t c, RngStream& rng) {
    Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 2.0 * rng.uniform() - 1.0;
    return m;
}

std::vector<std::complex<double>> eigenvalues(const Mat& a) {
    Eigen::MatrixXd e(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) e(i, j) = a(i, j);
    const Eigen::VectorXcd v = Eigen::EigenSolver<Eigen::MatrixXd>(e, false).eigenvalues();
    std::vector<std::complex<double>> out(v.data(), v.data() + v.size());
    std::sort(out.begin(), out.end(), [](auto x, auto y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    return out;
}

double spectral_radius(const Mat& a) {
    double r = 0.0;
    for (auto z : eigenvalues(a)) r = std::max(r, std::abs(z));
    return r;
}

} // namespace

TEST_CASE("scalar LQG with a = 0") {
    const PlantModel m = scalar_model();
    const LqgDesign d = synthesize_lqg(m, Mat{{1.0}}, Mat{{1.0}});
    CHECK(d.P(0, 0) == doctest::Approx(1.0));
    CHECK(d.K(0, 0) == doctest::Approx(0.5));
    CHECK(d.Sigma(0, 0) == doctest::Approx(2.0));
    CHECK(d.S(0, 0) == doctest::Approx(1.0));
    CHECK(std::abs(d.L(0, 0)) < 1e-15);
    const AugmentedSystem aug = build_augmented(m, d);
    CHECK(aug.Acal.max_abs() < 1e-15);
}

TEST_CASE("quadruple tank model") {
    const PlantSetup s = quadruple_tank(1);
    const PlantModel& m = s.model;
    CHECK(m.n() == 4);
    CHECK(m.m() == 2);
    CHECK(m.l() == 2);
    CHECK(m.sample_period == 2.0);
    CHECK(spectral_radius(m.A) < 1.0);
    CHECK(m.C == Mat{{0.5, 0, 0, 0}, {0, 0.5, 0, 0}});
    CHECK(m.U == Mat::diag({1.0 / 9.0, 1.0 / 9.0}));
    CHECK(s.W == Mat::identity(4));
    CHECK(s.V == Mat::diag({100.0, 100.0}));

    SUBCASE("zero-order hold identities") {
        const TankParameters p;
        const ContinuousModel cm = tank_continuous_model(p);
        // Upper-triangular A_c: the discrete diagonal is exp(T a_ii).
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(m.A(i, i) == doctest::Approx(std::exp(2.0 * cm.A(i, i))).epsilon(1e-13));
        }
        // A_c B_d = (A_d - I) B_c for the zero-order hold integral.
        const Mat lhs = cm.A * m.B;
        const Mat rhs = (m.A - Mat::identity(4)) * cm.B;
        CHECK((lhs - rhs).max_abs() < 1e-13);
    }
    SUBCASE("time constants of the operating point") {
        const TankParameters p;
        const ContinuousModel cm = tank_continuous_model(p);
        const double t1 = p.area[0] / p.outlet[0] * std::sqrt(2 * p.level0[0] / p.gravity);
        CHECK(-1.0 / cm.A(0, 0) == doctest::Approx(t1));
        CHECK(cm.A(0, 2) == doctest::Approx(p.area[2] / (p.area[0] * (-1.0 / cm.A(2, 2)))));
        CHECK(cm.B(0, 0) == doctest::Approx(p.valve_split[0] * p.pump_gain[0] / p.area[0]));
        CHECK(cm.B(3, 0) == doctest::Approx((1 - p.valve_split[0]) * p.pump_gain[0] / p.area[3]));
    }
    SUBCASE("noise covariances are Gram matrices for any seed") {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const PlantSetup t = quadruple_tank(seed);
            CHECK(min_eigenvalue(t.model.Q) >= -1e-15);
            CHECK(min_eigenvalue(t.model.R) > 0.0);
            CHECK(asymmetry(t.model.Q) == 0.0);
        }
        CHECK(quadruple_tank(3).model.Q == quadruple_tank(3).model.Q);
        CHECK_FALSE(quadruple_tank(3).model.Q == quadruple_tank(4).model.Q);
    }
}

TEST_CASE("LQG design on the tank") {
    const PlantSetup s = quadruple_tank(1);
    const PlantModel& m = s.model;
    const LqgDesign d = synthesize_lqg(m, s.W, s.V);

    CHECK(spectral_radius(m.A + m.B * d.L) < 1.0);
    CHECK(spectral_radius(m.A * (Mat::identity(4) - d.K * m.C)) < 1.0);
    CHECK((d.Sigma - (m.C * d.P * m.C.transpose() + m.R)).max_abs() < 1e-14);
    CHECK((d.K - d.P * m.C.transpose() * inverse(d.Sigma)).frobenius_norm() < 1e-9);
    CHECK(min_eigenvalue(d.Sigma) > 0.0);
    const Mat l_expected = -solve(m.B.transpose() * d.S * m.B + s.V, m.B.transpose() * d.S * m.A);
    CHECK((d.L - l_expected).frobenius_norm() < 1e-9);
    CHECK((filter_dare_step(d.P, m.A, m.C, m.Q, m.R) - d.P).frobenius_norm() < 1e-10);
    CHECK((dare_step(d.S, m.A, m.B, s.W, s.V) - d.S).frobenius_norm() < 1e-10);
}

TEST_CASE("augmented system blocks and spectrum") {
    const PlantSetup s = quadruple_tank(1);
    const PlantModel& m = s.model;
    const LqgDesign d = synthesize_lqg(m, s.W, s.V);
    const AugmentedSystem aug = build_augmented(m, d);
    const std::size_t n = 4;

    CHECK(aug.Acal.block(0, 0, n, n) == m.A + m.B * d.L);
    CHECK(aug.Acal.block(0, n, n, n) == -(m.B * d.L));
    CHECK(aug.Acal.block(n, 0, n, n) == Mat(n, n));
    CHECK(aug.Acal.block(n, n, n, n) == m.A);
    CHECK(aug.Ical == vstack({Mat::identity(n), Mat::identity(n)}));
    CHECK(aug.Bcal == vstack({m.B, m.B}));
    CHECK(aug.Kcal == vstack({Mat(n, 2), -d.K}));
    CHECK(aug.Kbar == hstack({aug.Ical, aug.Kcal}));
    CHECK(aug.Rcal == block_diag({m.Q, d.Sigma}));
    CHECK(aug.Lbar == hstack({d.L, -d.L}));

    auto joint = eigenvalues(m.A + m.B * d.L);
    const auto open = eigenvalues(m.A);
    joint.insert(joint.end(), open.begin(), open.end());
    std::sort(joint.begin(), joint.end(), [](auto x, auto y) {
        return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
    });
    const auto full = eigenvalues(aug.Acal);
    REQUIRE(full.size() == joint.size());
    for (std::size_t i = 0; i < full.size(); ++i) CHECK(std::abs(full[i] - joint[i]) < 1e-9);
    CHECK(spectral_radius(aug.Acal) < 1.0 - 1e-6);
}

TEST_CASE("residue bias recursion") {
    const PlantSetup s = quadruple_tank(1);
    const PlantModel& m = s.model;
    const LqgDesign d = synthesize_lqg(m, s.W, s.V);
    const Mat F = m.A * (Mat::identity(4) - d.K * m.C);

    SUBCASE("zero histories") {
        const std::vector<Mat> ua(5, Mat(2, 1)), ya(6, Mat(2, 1));
        for (std::size_t k = 0; k <= 5; ++k) CHECK(residue_bias(m, d, ua, ya, k).max_abs() == 0.0);
    }
    SUBCASE("single actuator impulse") {
        const Mat delta = Mat::column({0.3, -0.7});
        std::vector<Mat> ua(1, delta), ya(2, Mat(2, 1));
        CHECK((residue_bias(m, d, ua, ya, 1) - m.C * m.B * delta).max_abs() < 1e-15);
    }
    SUBCASE("matches the explicit convolution sum on random histories") {
        RngStream rng(21);
        for (int t = 0; t < 20; ++t) {
            std::vector<Mat> ua, ya;
            for (int j = 0; j < 5; ++j) ua.push_back(random_mat(2, 1, rng));
            for (int j = 0; j < 6; ++j) ya.push_back(random_mat(2, 1, rng));
            for (std::size_t k = 0; k <= 5; ++k) {
                Mat sum = ya[k];
                for (std::size_t j = 0; j < k; ++j) {
                    Mat power = Mat::identity(4);
                    for (std::size_t p = 0; p + 1 + j < k; ++p) power = power * F;
                    sum += m.C * power * (m.B * ua[j] - m.A * d.K * ya[j]);
                }
                CHECK((residue_bias(m, d, ua, ya, k) - sum).max_abs() < 1e-10);
            }
        }
    }
    SUBCASE("covert histories leave no residue bias") {
        RngStream rng(5);
        Mat xa(4, 1);
        std::vector<Mat> ua, ya;
        for (int j = 0; j < 30; ++j) {
            ya.push_back(-(m.C * xa));
            ua.push_back(random_mat(2, 1, rng));
            xa = m.A * xa + m.B * ua.back();
        }
        ya.push_back(-(m.C * xa));
        for (std::size_t k = 0; k <= 30; ++k) CHECK(residue_bias(m, d, ua, ya, k).max_abs() < 1e-12);
    }
    SUBCASE("short histories are rejected") {
        const std::vector<Mat> ua(1, Mat(2, 1)), ya(2, Mat(2, 1));
        CHECK_THROWS_AS(residue_bias(m, d, ua, ya, 3), DimensionError);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    PlantModel m = scalar_model();
    m.C = Mat(2, 2);
    CHECK_THROWS(synthesize_lqg(m, Mat{{1.0}}, Mat{{1.0}}));
}
