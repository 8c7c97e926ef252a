#include "cpsguard/pipeline.hpp"

#include <cmath>

#include "cpsguard/errors.hpp"

namespace cpsguard {

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(std::string(name) + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(name) + ": " + e.what());
    }
}

PlantSetup build_plant(const RunConfig& c) {
    PlantSetup s;
    if (c.model == ModelSource::QuadrupleTank) {
        s = quadruple_tank(c.model_seed, c.tank);
    } else {
        const auto& M = c.matrices;
        s.model.A = M.at("A");
        s.model.B = M.at("B");
        s.model.C = M.at("C");
        s.model.Q = M.at("Q");
        s.model.R = M.at("R");
        s.model.U = M.at("U");
        s.model.sample_period = c.sample_period;
        s.W = Mat::identity(s.model.n());
        s.V = Mat::identity(s.model.l());
    }
    if (auto it = c.matrices.find("W"); it != c.matrices.end()) s.W = it->second;
    if (auto it = c.matrices.find("V"); it != c.matrices.end()) s.V = it->second;
    return s;
}

SafetySpec build_spec(const RunConfig& c, std::size_t n) {
    SafetySpec spec;
    if (auto it = c.matrices.find("SAFETY"); it != c.matrices.end()) {
        const Mat& dirs = it->second;
        if (dirs.cols() != 2 * n) throw ConfigError("SAFETY must have 2n columns");
        for (std::size_t r = 0; r < dirs.rows(); ++r) {
            spec.constraints.push_back({dirs.block(r, 0, 1, 2 * n).transpose(), c.safety_bounds[r]});
        }
    } else {
        spec = SafetySpec::state_box(n, c.safety_bound);
    }
    spec.validate();
    return spec;
}

std::vector<double> scale_grid(const RunConfig& c) {
    std::vector<double> out;
    const std::size_t pts = c.p1_scale_points;
    const double lo = std::log10(c.p1_scale_min), hi = std::log10(c.p1_scale_max);
    for (std::size_t i = 0; i < pts; ++i) {
        const double t = pts == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(pts - 1);
        out.push_back(std::pow(10.0, lo + t * (hi - lo)));
    }
    return out;
}

} // namespace

LoopModel build_loop(const RunConfig& config) {
    config.validate();
    LoopModel loop;
    const PlantSetup setup = stage("plant", [&] { return build_plant(config); });
    loop.model = setup.model;
    loop.W = setup.W;
    loop.V = setup.V;
    loop.design = stage("plant", [&] { return synthesize_lqg(loop.model, loop.W, loop.V); });
    loop.aug = stage("plant", [&] { return build_augmented(loop.model, loop.design); });
    loop.detector = stage("stealth", [&] { return make_detector(loop.model.m(), config.window, config.false_alarm); });
    loop.budget = stage("stealth", [&] { return solve_lambda_bar(loop.detector, config.p_d); });
    loop.spec = stage("safety", [&] { return build_spec(config, loop.model.n()); });
    return loop;
}

Certificates synthesize_certificates(const RunConfig& config, const LoopModel& loop) {
    Certificates out;
    const AttackBounds bounds{loop.model.U, loop.design.Sigma, loop.budget.lambda_bar};
    out.inv = stage("lmi", [&] { return synthesize_p2(loop.aug, config.p, config.lmi); });

    auto rate_at = [&](double scale) {
        const P1Gamma p1 = synthesize_p1_gamma(loop.aug, scale);
        return synthesize_gamma_a(loop.aug, p1, bounds, config.lmi);
    };

    if (!config.p1_scale_auto) {
        out.p1_scale = config.p1_scale;
        out.rate = stage("lmi", [&] { return rate_at(config.p1_scale); });
    } else {
        bool found = false;
        double best = -1.0;
        std::string last_error = "no P1 scale admits a certificate";
        for (double scale : scale_grid(config)) {
            ScaleCandidate cand;
            cand.scale = scale;
            try {
                RateCertificate rate = stage("lmi", [&] { return rate_at(scale); });
                cand.gamma_a = rate.gamma_a;
                cand.ta_bound = stage("safety", [&] {
                    return max_ta_bound_real(rate, out.inv, loop.spec, config.horizon);
                });
                cand.feasible = true;
                if (!found || cand.ta_bound >= best) {
                    best = cand.ta_bound;
                    out.rate = std::move(rate);
                    out.p1_scale = scale;
                    found = true;
                }
            } catch (const InfeasibleError& e) {
                last_error = e.what();
            }
            out.scale_scan.push_back(cand);
        }
        if (!found) throw InfeasibleError("lmi: P1 scale scan found no usable certificate (last: " + last_error + ")");
    }
    out.report = check_certificates(loop.aug, bounds, out.rate, out.inv);
    return out;
}

Analysis analyze(const RunConfig& config) {
    Analysis a;
    a.config = config;
    a.hash = config_hash(config);
    a.loop = build_loop(config);
    a.certs = synthesize_certificates(config, a.loop);
    return a;
}

bool initial_condition_ok(const Analysis& a) {
    if (a.config.x0.empty()) return true;
    const std::size_t n = a.loop.model.n();
    Mat xbar(2 * n, 1);
    for (std::size_t i = 0; i < n; ++i) xbar[i] = a.config.x0[i];
    return quad_form(xbar, a.certs.inv.P2) <= 1.0 / (1.0 - a.certs.inv.p);
}

SimSetup make_sim_setup(const Analysis& a) {
    const std::size_t n = a.loop.model.n();
    if (!a.config.x0.empty() && a.config.x0.size() != n) throw ConfigError("sim.x0 must have n entries");
    SimSetup s;
    s.model = a.loop.model;
    s.design = a.loop.design;
    s.aug = a.loop.aug;
    s.detector = a.loop.detector;
    s.spec = a.loop.spec;
    s.x0 = a.config.x0.empty() ? Mat(n, 1) : Mat::column(a.config.x0);
    s.stationary_start = a.config.stationary_start;
    s.P2 = a.certs.inv.P2;
    s.p = a.certs.inv.p;
    s.record_states = a.config.trajectories;
    return s;
}

AttackStrategy make_strategy(const Analysis& a) {
    switch (a.config.attack) {
    case AttackChoice::None: return AttackStrategy::none();
    case AttackChoice::Covert:
        if (a.config.covert_input.size() != a.loop.model.l()) throw ConfigError("sim.covert_input must have l entries");
        return AttackStrategy::covert(Mat::column(a.config.covert_input));
    case AttackChoice::Budget: return AttackStrategy::residue_budget(a.certs.rate.P1, a.loop.budget.lambda_bar);
    }
    return AttackStrategy::none();
}

} // namespace cpsguard
