#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cpsguard/errors.hpp"
#include "cpsguard/lmi.hpp"
#include "cpsguard/plant.hpp"
#include "cpsguard/rng.hpp"
#include "cpsguard/safety.hpp"
#include "cpsguard/sim.hpp"
#include "cpsguard/stealth.hpp"

using namespace cpsguard;

namespace {

struct TankLoop {
    SimSetup setup;
    StealthBudget budget;
    RateCertificate rate;
};

const TankLoop& tank_loop() {
    static const TankLoop t = [] {
        TankLoop out;
        const PlantSetup ps = quadruple_tank(1);
        SimSetup& s = out.setup;
        s.model = ps.model;
        s.design = synthesize_lqg(ps.model, ps.W, ps.V);
        s.aug = build_augmented(s.model, s.design);
        s.detector = make_detector(2, 10, 0.01);
        s.spec = SafetySpec::state_box(4, 30.0);
        s.x0 = Mat(4, 1);
        out.budget = solve_lambda_bar(s.detector, 0.99);
        const AttackBounds bounds{s.model.U, s.design.Sigma, out.budget.lambda_bar};
        out.rate = synthesize_gamma_a(s.aug, synthesize_p1_gamma(s.aug, 0.03), bounds);
        return out;
    }();
    return t;
}

AttackStrategy budget_strategy() {
    return AttackStrategy::residue_budget(tank_loop().rate.P1, tank_loop().budget.lambda_bar);
}

Mat random_vec(std::size_t n, RngStream& rng, double scale = 1.0) {
    Mat v(n, 1);
    for (std::size_t i = 0; i < n; ++i) v[i] = scale * rng.normal();
    return v;
}

bool same_report(const MonteCarloReport& a, const MonteCarloReport& b) {
    return a.valid_trials == b.valid_trials && a.windows == b.windows && a.alarms == b.alarms &&
           a.alarm_rate == b.alarm_rate && a.alarm_rate_se == b.alarm_rate_se &&
           a.violation_trials == b.violation_trials && a.max_stat == b.max_stat &&
           a.max_state_deviation == b.max_state_deviation && a.max_ratio == b.max_ratio &&
           a.max_input_level == b.max_input_level && a.attack_steps == b.attack_steps &&
           a.e2_outside == b.e2_outside && a.e2_samples == b.e2_samples;
}

} // namespace

TEST_CASE("saturation projects radially onto the input ellipsoid") {
    const Mat U = Mat::diag({1.0 / 9.0, 1.0 / 4.0});
    const Mat inside = Mat::column({1.0, 1.0});
    CHECK(saturate(inside, U) == inside);
    RngStream rng(2);
    for (int i = 0; i < 1000; ++i) {
        const Mat u = random_vec(2, rng, 10.0);
        const Mat s = saturate(u, U);
        CHECK(quad_form(s, U) <= 1.0 + 1e-12);
        if (quad_form(u, U) > 1.0) {
            CHECK(quad_form(s, U) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(std::abs(s[0] * u[1] - s[1] * u[0]) < 1e-9 * u.frobenius_norm());
            CHECK(dot(s, u) > 0.0);
        }
    }
}

TEST_CASE("covert attacker") {
    const SimSetup& s = tank_loop().setup;
    CovertAttacker attacker(s.model);
    CHECK(attacker.sensor_bias().max_abs() == 0.0);
    const Mat delta = Mat::column({0.4, -1.1});
    const auto [ua0, ya0] = covert_step(attacker, delta);
    CHECK(ua0 == delta);
    CHECK(ya0.max_abs() == 0.0);
    CHECK((attacker.sensor_bias() + s.model.C * s.model.B * delta).max_abs() < 1e-15);
    const auto [ua1, ya1] = covert_step(attacker, Mat(2, 1));
    CHECK((ya1 + s.model.C * s.model.B * delta).max_abs() < 1e-15);
    CHECK((attacker.state() - s.model.A * s.model.B * delta).max_abs() < 1e-15);
}

TEST_CASE("greedy budget step") {
    const TankLoop& t = tank_loop();
    const SimSetup& s = t.setup;
    const BudgetAttackContext ctx =
        make_budget_context(s.aug, s.design, s.model.U, t.rate.P1, t.budget.lambda_bar, 10);
    const Mat sigma_inv = inverse(s.design.Sigma);
    RngStream rng(6);
    for (int i = 0; i < 200; ++i) {
        const Mat xbar1 = random_vec(8, rng, 5.0);
        const Mat u = random_vec(2, rng, 0.5);
        std::vector<double> recent(9);
        for (double& r : recent) r = 2.0 * rng.uniform();
        const double used = std::accumulate(recent.begin(), recent.end(), 0.0);
        const BudgetAttack a = budget_attack_step(ctx, xbar1, u, recent);
        // Residue bias spends exactly the remaining budget.
        CHECK(quad_form(a.dz, sigma_inv) == doctest::Approx(t.budget.lambda_bar - used).epsilon(1e-10));
        // Applied input sits on the saturation boundary.
        CHECK(quad_form(u + a.ua, s.model.U) == doctest::Approx(1.0).epsilon(1e-12));
        // Both choices beat random points of their ellipsoids along the ascent direction.
        const Mat g = t.rate.P1 * (s.aug.Acal * xbar1);
        const double gain_dz = dot(g, s.aug.Kcal * a.dz);
        const double gain_u = dot(g, s.aug.Bcal * (u + a.ua));
        for (int j = 0; j < 20; ++j) {
            const Mat e = random_vec(2, rng);
            const Mat dz = cholesky(s.design.Sigma) * e * std::sqrt((t.budget.lambda_bar - used) / dot(e, e));
            CHECK(dot(g, s.aug.Kcal * dz) <= gain_dz * (1 + 1e-12) + 1e-12);
            const Mat ub = saturate(random_vec(2, rng, 10.0), s.model.U);
            CHECK(dot(g, s.aug.Bcal * ub) <= gain_u * (1 + 1e-12) + 1e-12);
        }
    }
    SUBCASE("exhausted budget gives no residue bias") {
        const std::vector<double> spent{t.budget.lambda_bar, 1.0};
        CHECK(budget_attack_step(ctx, Mat::unit(8, 0), Mat(2, 1), spent).dz.max_abs() == 0.0);
    }
    SUBCASE("at most T-1 previous terms") {
        const std::vector<double> too_many(10, 0.0);
        CHECK_THROWS_AS(budget_attack_step(ctx, Mat::unit(8, 0), Mat(2, 1), too_many), DimensionError);
    }
}

TEST_CASE("noise-free loop stays at the origin") {
    SimSetup s = tank_loop().setup;
    s.model.Q = Mat(4, 4);
    s.model.R = Mat(2, 2);
    s.stationary_start = false;
    const TrialResult r = simulate_trial(s, AttackStrategy::none(), std::vector<bool>(50, false), 50, RngStream(1));
    CHECK(r.steps == 50);
    CHECK(r.state_norms.size() == 51);
    for (double v : r.state_norms) CHECK(v == 0.0);
    for (double g : r.stats) CHECK(g == 0.0);
    CHECK(r.stats.size() == 42);
    CHECK_FALSE(r.violation);
}

TEST_CASE("normal operation: detector calibration") {
    const SimSetup& s = tank_loop().setup;
    const std::size_t horizon = 200, trials = 200;
    const MonteCarloReport rep =
        run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(horizon, false), horizon, trials, 10);
    CHECK(rep.windows == trials * (horizon + 1 - 9));
    CHECK(rep.valid_trials == trials);
    CHECK(std::abs(rep.alarm_rate - 0.01) <= 3.0 * std::max(rep.alarm_rate_se, std::sqrt(0.0099 / rep.windows)));
    CHECK(rep.attack_steps == 0);
    CHECK(rep.violation_trials == 0);

    // Residues are N(0, Sigma), so each window statistic has mean mT = 20.
    std::vector<TrialResult> kept;
    run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(horizon, false), horizon, 100, 500, &kept);
    double sum = 0.0, count = 0.0;
    for (const auto& r : kept) {
        for (std::size_t i = 0; i < r.stats.size(); i += 10) {  // disjoint windows
            sum += r.stats[i];
            count += 1.0;
        }
        for (double dz : r.dz_terms) CHECK(dz == 0.0);
    }
    CHECK(std::abs(sum / count - 20.0) < 3.0 * std::sqrt(40.0 / count));
}

TEST_CASE("covert attack leaves the residues untouched") {
    const SimSetup& s = tank_loop().setup;
    const std::size_t horizon = 100;
    const std::vector<bool> all(horizon, true);
    const AttackStrategy covert = AttackStrategy::covert(Mat::column({2.0, 2.0}));
    std::vector<TrialResult> attacked, clean;
    run_monte_carlo(s, covert, all, horizon, 50, 7, &attacked);
    run_monte_carlo(s, AttackStrategy::none(), all, horizon, 50, 7, &clean);
    double norm_attacked = 0.0, norm_clean = 0.0;
    for (std::size_t i = 0; i < attacked.size(); ++i) {
        CHECK(attacked[i].max_abs_dz_gap < 1e-9);
        CHECK(attacked[i].attack_steps == horizon);
        // Same noise, so the detector sees the same residues.
        REQUIRE(attacked[i].stats.size() == clean[i].stats.size());
        for (std::size_t w = 0; w < clean[i].stats.size(); ++w) {
            CHECK(attacked[i].stats[w] == doctest::Approx(clean[i].stats[w]).epsilon(1e-9));
        }
        norm_attacked += attacked[i].state_norms.back();
        norm_clean += clean[i].state_norms.back();
    }
    CHECK(norm_attacked > 2.0 * norm_clean);
}

TEST_CASE("budget attack respects the stealthy window budget") {
    const TankLoop& t = tank_loop();
    SimSetup s = t.setup;
    s.record_states = true;
    // A larger P1 scale so that the attack pushes xbar1 past V = 1.
    const AttackBounds bounds{s.model.U, s.design.Sigma, t.budget.lambda_bar};
    const RateCertificate rate = synthesize_gamma_a(s.aug, synthesize_p1_gamma(s.aug, 1.0), bounds);
    const std::size_t horizon = 100;
    const std::vector<bool> all(horizon, true);
    std::vector<TrialResult> kept;
    const MonteCarloReport rep = run_monte_carlo(s, AttackStrategy::residue_budget(rate.P1, t.budget.lambda_bar), all,
                                                 horizon, 40, 3, &kept);
    CHECK(rep.attack_steps == 40 * horizon);
    CHECK(rep.max_input_level <= 1.0 + 1e-9);

    std::size_t growth_checks = 0;
    for (const auto& r : kept) {
        for (std::size_t k = 9; k < r.dz_terms.size(); ++k) {
            double w = 0.0;
            for (std::size_t j = k - 9; j <= k; ++j) w += r.dz_terms[j];
            CHECK(w <= t.budget.lambda_bar * (1 + 1e-9));
        }
        // Once the attack runs, every window spends the whole budget.
        CHECK(std::accumulate(r.dz_terms.end() - 10, r.dz_terms.end(), 0.0) ==
              doctest::Approx(t.budget.lambda_bar).epsilon(1e-9));
        // One-step attack growth wherever the certificate's premises hold.
        for (std::size_t k = 0; k + 1 < r.xbar1.size(); ++k) {
            const double v = quad_form(r.xbar1[k], rate.P1);
            const Mat u = s.aug.Lbar * r.states[k];
            if (v < 1.0 || quad_form(u, s.model.U) > 1.0) continue;
            ++growth_checks;
            CHECK(quad_form(r.xbar1[k + 1], rate.P1) <= rate.gamma_a * v * (1 + 1e-9));
        }
    }
    CHECK(growth_checks > 100);
}

TEST_CASE("noise-driven component stays in E2 with the certified probability") {
    const TankLoop& t = tank_loop();
    SimSetup s = t.setup;
    const InvarianceCertificate inv = synthesize_p2_scaling(s.aug, 0.99);
    s.P2 = inv.P2;
    s.p = 0.99;
    const std::size_t horizon = 100;
    const MonteCarloReport quiet = run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(horizon, false),
                                                   horizon, 200, 11);
    CHECK(quiet.e2_samples == 200 * (horizon + 1));
    CHECK(quiet.e2_outside_rate <= 0.01 + 3.0 * quiet.e2_outside_se);
    // The attack enters only through xbar1, so the split is unaffected.
    const MonteCarloReport attacked =
        run_monte_carlo(s, budget_strategy(), std::vector<bool>(horizon, true), horizon, 200, 11);
    CHECK(attacked.e2_outside_rate <= 0.01 + 3.0 * attacked.e2_outside_se);
}

TEST_CASE("reproducibility") {
    const SimSetup& s = tank_loop().setup;
    const std::vector<bool> mask = ResponseSchedule::mechanism1().mask(80);
    const MonteCarloReport a = run_monte_carlo(s, budget_strategy(), mask, 80, 30, 99, nullptr, 1);
    const MonteCarloReport b = run_monte_carlo(s, budget_strategy(), mask, 80, 30, 99, nullptr, 4);
    const MonteCarloReport c = run_monte_carlo(s, budget_strategy(), mask, 80, 30, 99, nullptr, 7);
    CHECK(same_report(a, b));
    CHECK(same_report(a, c));
    const MonteCarloReport d = run_monte_carlo(s, budget_strategy(), mask, 80, 30, 100, nullptr, 4);
    CHECK_FALSE(same_report(a, d));

    const TrialResult r1 = simulate_trial(s, budget_strategy(), mask, 80, RngStream(5));
    const TrialResult r2 = simulate_trial(s, budget_strategy(), mask, 80, RngStream(5));
    CHECK(r1.state_norms == r2.state_norms);
    CHECK(r1.stats == r2.stats);
}

TEST_CASE("diverging trials are marked, not dropped") {
    PlantModel m;
    m.A = Mat{{2.0}};
    m.B = Mat{{1.0}};
    m.C = Mat{{1.0}};
    m.Q = Mat{{1.0}};
    m.R = Mat{{1.0}};
    m.U = Mat{{1.0}};
    SimSetup s;
    s.model = m;
    s.design = synthesize_lqg(m, Mat{{1.0}}, Mat{{1.0}});
    s.design.L = Mat{{0.0}};  // open loop
    s.aug = build_augmented(m, s.design);
    s.detector = make_detector(1, 2, 0.01);
    s.spec = SafetySpec::state_box(1, 10.0);
    const MonteCarloReport rep =
        run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(100, false), 100, 5, 1);
    CHECK(rep.trials == 5);
    CHECK(rep.diverged_trials == 5);
    CHECK(rep.valid_trials == 0);
    const TrialResult r = simulate_trial(s, AttackStrategy::none(), std::vector<bool>(100, false), 100, RngStream(1));
    CHECK(r.diverged);
    CHECK(r.steps < 100);
    CHECK(r.violation);
}

TEST_CASE("argument checks") {
    const SimSetup& s = tank_loop().setup;
    CHECK_THROWS_AS(simulate_trial(s, AttackStrategy::none(), std::vector<bool>(5, false), 10, RngStream(1)),
                    DimensionError);
    CHECK_THROWS_AS(simulate_trial(s, AttackStrategy::none(), {}, 0, RngStream(1)), DomainError);
    CHECK_THROWS_AS(simulate_trial(s, AttackStrategy::covert(Mat::column({1.0})), std::vector<bool>(5, true), 5,
                                   RngStream(1)),
                    DimensionError);
    CHECK_THROWS_AS(run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(5, false), 5, 0, 1), DomainError);
}

TEST_CASE("trajectory CSV") {
    SimSetup s = tank_loop().setup;
    s.record_states = true;
    std::vector<TrialResult> kept;
    run_monte_carlo(s, AttackStrategy::none(), std::vector<bool>(3, false), 3, 2, 1, &kept);
    std::ostringstream os;
    write_trajectories_csv(os, kept);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "trial,k,x1,x2,x3,x4,e1,e2,e3,e4,norm");
    std::size_t rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        CHECK(std::count(line.begin(), line.end(), ',') == 10);
    }
    CHECK(rows == 2 * 4);
}
