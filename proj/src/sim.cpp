#include "cpsguard/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <thread>

namespace cpsguard {

// ============================================================================
// Attackers
// ============================================================================

AttackStrategy AttackStrategy::covert(const Mat& input) {
    AttackStrategy s;
    s.kind = AttackKind::Covert;
    s.covert_input = input;
    return s;
}

AttackStrategy AttackStrategy::residue_budget(const Mat& P1, double lambda_bar) {
    if (!(lambda_bar >= 0.0)) throw DomainError("residue_budget: lambda_bar must be nonnegative");
    AttackStrategy s;
    s.kind = AttackKind::ResidueBudget;
    s.P1 = P1;
    s.lambda_bar = lambda_bar;
    return s;
}

CovertAttacker::CovertAttacker(const PlantModel& model)
    : A_(model.A), B_(model.B), C_(model.C), xa_(model.n(), 1) {}

Mat CovertAttacker::sensor_bias() const { return -(C_ * xa_); }

void CovertAttacker::advance(const Mat& ua) { xa_ = A_ * xa_ + B_ * ua; }

std::pair<Mat, Mat> covert_step(CovertAttacker& attacker, const Mat& ua) {
    Mat ya = attacker.sensor_bias();
    attacker.advance(ua);
    return {ua, std::move(ya)};
}

BudgetAttackContext make_budget_context(const AugmentedSystem& aug, const LqgDesign& design, const Mat& U,
                                        const Mat& P1, double lambda_bar, std::size_t window) {
    if (P1.rows() != aug.dim() || !P1.is_square()) throw DimensionError("budget attack: P1 must be 2n x 2n");
    if (window == 0) throw DomainError("budget attack: window must be positive");
    BudgetAttackContext ctx;
    ctx.Acal = aug.Acal;
    ctx.Kcal = aug.Kcal;
    ctx.Bcal = aug.Bcal;
    ctx.P1 = P1;
    ctx.Sigma = design.Sigma;
    ctx.U = U;
    ctx.lambda_bar = lambda_bar;
    ctx.window = window;
    return ctx;
}

BudgetAttack budget_attack_step(const BudgetAttackContext& ctx, const Mat& xbar1, const Mat& u,
                                std::span<const double> recent_terms) {
    const std::size_t m = ctx.Kcal.cols();
    const std::size_t l = ctx.Bcal.cols();
    if (recent_terms.size() >= ctx.window) throw DimensionError("budget attack: at most T-1 previous terms");
    const Mat g = ctx.P1 * (ctx.Acal * xbar1);

    double used = 0.0;
    for (double t : recent_terms) used += t;
    const double r = std::max(0.0, ctx.lambda_bar - used);

    BudgetAttack out;
    out.dz = Mat(m, 1);
    if (r > 0.0) {
        const Mat kg = ctx.Kcal.transpose() * g;
        const Mat w = ctx.Sigma * kg;
        const double den = dot(kg, w);
        if (den > 0.0) {
            out.dz = w * std::sqrt(r / den);
        } else {
            out.dz = cholesky(ctx.Sigma) * Mat::unit(m, 0) * std::sqrt(r);
        }
    }

    const Mat bg = ctx.Bcal.transpose() * g;
    const Mat s = solve(ctx.U, bg);
    const double den = dot(bg, s);
    Mat ubar = den > 0.0 ? s * (1.0 / std::sqrt(den)) : Mat::unit(l, 0) * (1.0 / std::sqrt(ctx.U(0, 0)));
    out.ua = ubar - u;
    return out;
}

// ============================================================================
// Simulation
// ============================================================================

Mat saturate(const Mat& u, const Mat& U) {
    const double level = quad_form(u, U);
    return level > 1.0 ? u * (1.0 / std::sqrt(level)) : u;
}

namespace {

// F with F F^T = cov; Cholesky when PD, otherwise an eigenvalue square root.
Mat noise_factor(const Mat& cov) {
    Mat lower;
    if (try_cholesky(cov, lower)) return lower;
    const SymEigDecomp eig = sym_eig(symmetrize(cov));
    Mat f = eig.eigenvectors;
    for (std::size_t j = 0; j < f.cols(); ++j) {
        const double s = std::sqrt(std::max(0.0, eig.eigenvalues[j]));
        for (std::size_t i = 0; i < f.rows(); ++i) f(i, j) *= s;
    }
    return f;
}

Mat gaussian(const Mat& factor, RngStream& rng) {
    Mat e(factor.cols(), 1);
    for (std::size_t i = 0; i < e.rows(); ++i) e[i] = rng.normal();
    return factor * e;
}

constexpr double kDivergence = 1e12;

} // namespace

TrialResult simulate_trial(const SimSetup& setup, const AttackStrategy& strategy, const std::vector<bool>& vulnerable,
                           std::size_t horizon, RngStream rng) {
    const PlantModel& M = setup.model;
    const LqgDesign& D = setup.design;
    const std::size_t n = M.n(), m = M.m(), l = M.l();
    if (horizon == 0) throw DomainError("simulate_trial: horizon must be positive");
    if (vulnerable.size() < horizon) throw DimensionError("simulate_trial: schedule shorter than horizon");
    if (strategy.kind == AttackKind::Covert && (strategy.covert_input.rows() != l || strategy.covert_input.cols() != 1)) {
        throw DimensionError("simulate_trial: covert input must be l x 1");
    }

    const Mat qf = noise_factor(M.Q);
    const Mat rf = noise_factor(M.R);
    Mat xhat = setup.x0.empty() ? Mat(n, 1) : setup.x0;
    Mat x = xhat;
    if (setup.stationary_start) x += gaussian(noise_factor(D.P), rng);

    ChiSquaredDetector detector(setup.detector, D.Sigma);
    ResidueBiasTracker tracker(M, D);
    CovertAttacker covert(M);
    std::optional<BudgetAttackContext> budget;
    if (strategy.kind == AttackKind::ResidueBudget) {
        budget = make_budget_context(setup.aug, D, M.U, strategy.P1, strategy.lambda_bar, setup.detector.window);
    }
    const double level2 = 1.0 / (1.0 - setup.p);
    const std::size_t keep_terms = setup.detector.window - 1;

    TrialResult res;
    res.state_norms.reserve(horizon + 1);
    res.dz_terms.reserve(horizon + 1);
    Mat xbar1(2 * n, 1);
    Mat ya(m, 1);  // sensor bias on the current measurement

    for (std::size_t k = 0;; ++k) {
        const Mat y = M.C * x + gaussian(rf, rng) + ya;
        const Mat z = y - M.C * xhat;
        const Mat dz = tracker.bias(ya);
        res.dz_terms.push_back(detector.weighted_norm2(dz));
        if (strategy.kind == AttackKind::Covert) res.max_abs_dz_gap = std::max(res.max_abs_dz_gap, dz.max_abs());
        if (const auto g = detector.push(z)) {
            res.stats.push_back(*g);
            res.alarms.push_back(detector.alarm(*g));
        }
        const Mat xpost = xhat + D.K * z;
        const Mat xbar = vstack({x, x - xpost});

        const double norm = x.frobenius_norm();
        res.state_norms.push_back(norm);
        if (!xbar.all_finite() || !(norm <= kDivergence)) {
            res.diverged = true;
            break;
        }
        const double ratio = setup.spec.constraints.empty() ? 0.0 : setup.spec.worst_ratio(xbar);
        res.max_ratio = std::max(res.max_ratio, ratio);
        for (const auto& h : setup.spec.constraints) {
            res.max_deviation = std::max(res.max_deviation, std::abs(dot(h.direction, xbar)));
        }
        if (ratio > 1.0) res.violation = true;
        if (setup.P2) {
            ++res.e2_samples;
            if (quad_form(xbar - xbar1, *setup.P2) > level2) ++res.e2_outside;
        }
        if (setup.record_states) {
            res.states.push_back(xbar);
            res.xbar1.push_back(xbar1);
        }
        if (k == horizon) break;

        const Mat u = D.L * xpost;
        const bool attacked = strategy.kind != AttackKind::None && vulnerable[k];
        Mat ua(l, 1);
        Mat dz_target(m, 1);
        if (attacked && strategy.kind == AttackKind::Covert) {
            ua = strategy.covert_input;
        } else if (attacked) {
            const std::size_t have = res.dz_terms.size();
            const std::size_t take = std::min(keep_terms, have);
            const std::span<const double> recent(res.dz_terms.data() + (have - take), take);
            BudgetAttack a = budget_attack_step(*budget, xbar1, u, recent);
            ua = std::move(a.ua);
            dz_target = std::move(a.dz);
        }
        const Mat ubar = saturate(u + ua, M.U);
        const Mat ua_eff = ubar - u;
        res.max_input_level = std::max(res.max_input_level, quad_form(ubar, M.U));
        if (attacked) ++res.attack_steps;

        x = M.A * x + M.B * ubar + gaussian(qf, rng);
        xhat = M.A * xpost + M.B * u;
        tracker.advance(ua_eff, ya);
        covert.advance(ua_eff);

        Mat ya_next(m, 1);
        if (attacked && strategy.kind == AttackKind::Covert) {
            ya_next = covert.sensor_bias();
        } else if (attacked) {
            ya_next = dz_target - tracker.bias(Mat(m, 1));
        }
        xbar1 = setup.aug.Acal * xbar1 + setup.aug.Kcal * tracker.bias(ya_next) + setup.aug.Bcal * ua_eff;
        ya = std::move(ya_next);
        res.steps = k + 1;
    }
    return res;
}

MonteCarloReport run_monte_carlo(const SimSetup& setup, const AttackStrategy& strategy,
                                 const std::vector<bool>& vulnerable, std::size_t horizon, std::size_t trials,
                                 std::uint64_t seed, std::vector<TrialResult>* keep, unsigned threads) {
    if (trials == 0) throw DomainError("run_monte_carlo: trials must be positive");
    std::vector<TrialResult> results(trials);
    unsigned workers = threads != 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, trials));
    auto run = [&](unsigned w) {
        for (std::size_t i = w; i < trials; i += workers) {
            results[i] = simulate_trial(setup, strategy, vulnerable, horizon, RngStream(seed + i));
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& t : pool) t.join();
    }

    MonteCarloReport rep;
    rep.trials = trials;
    rep.horizon = horizon;
    rep.seed = seed;
    std::vector<double> win, alm, e2n, e2o;
    for (const TrialResult& r : results) {
        if (r.diverged) {
            ++rep.diverged_trials;
            continue;
        }
        ++rep.valid_trials;
        std::size_t a = 0;
        for (bool b : r.alarms) a += b ? 1 : 0;
        rep.windows += r.alarms.size();
        rep.alarms += a;
        win.push_back(static_cast<double>(r.alarms.size()));
        alm.push_back(static_cast<double>(a));
        for (double g : r.stats) rep.max_stat = std::max(rep.max_stat, g);
        if (r.violation) ++rep.violation_trials;
        rep.max_ratio = std::max(rep.max_ratio, r.max_ratio);
        rep.max_state_deviation = std::max(rep.max_state_deviation, r.max_deviation);
        rep.max_input_level = std::max(rep.max_input_level, r.max_input_level);
        rep.attack_steps += r.attack_steps;
        rep.e2_samples += r.e2_samples;
        rep.e2_outside += r.e2_outside;
        e2n.push_back(static_cast<double>(r.e2_samples));
        e2o.push_back(static_cast<double>(r.e2_outside));
    }

    // Ratio estimate with a between-trial (batch means) standard error.
    auto ratio_se = [](const std::vector<double>& num, const std::vector<double>& den, double rate) {
        const std::size_t N = num.size();
        if (N < 2) return 0.0;
        double total = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            total += den[i];
            const double r = num[i] - rate * den[i];
            ss += r * r;
        }
        const double mean = total / static_cast<double>(N);
        if (mean == 0.0) return 0.0;
        return std::sqrt(ss / (static_cast<double>(N) * static_cast<double>(N - 1))) / mean;
    };
    if (rep.windows > 0) {
        rep.alarm_rate = static_cast<double>(rep.alarms) / static_cast<double>(rep.windows);
        rep.alarm_rate_se = ratio_se(alm, win, rep.alarm_rate);
    }
    if (rep.valid_trials > 0) {
        const double v = static_cast<double>(rep.violation_trials) / static_cast<double>(rep.valid_trials);
        rep.violation_rate = v;
        rep.violation_rate_se = std::sqrt(v * (1.0 - v) / static_cast<double>(rep.valid_trials));
    }
    if (rep.e2_samples > 0) {
        rep.e2_outside_rate = static_cast<double>(rep.e2_outside) / static_cast<double>(rep.e2_samples);
        rep.e2_outside_se = ratio_se(e2o, e2n, rep.e2_outside_rate);
    }
    if (keep) *keep = std::move(results);
    return rep;
}

void write_trajectories_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
    std::size_t n = 0;
    for (const auto& t : trials) {
        if (!t.states.empty()) {
            n = t.states.front().rows() / 2;
            break;
        }
    }
    os << "trial,k";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",e" << i;
    os << ",norm\n";
    for (std::size_t t = 0; t < trials.size(); ++t) {
        const auto& tr = trials[t];
        for (std::size_t k = 0; k < tr.states.size(); ++k) {
            os << t << ',' << k;
            for (std::size_t i = 0; i < 2 * n; ++i) os << ',' << tr.states[k][i];
            os << ',' << tr.state_norms[k] << '\n';
        }
    }
}

} // namespace cpsguard
