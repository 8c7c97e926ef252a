#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "cpsguard/matcore.hpp"
#include "cpsguard/plant.hpp"
#include "cpsguard/rng.hpp"
#include "cpsguard/safety.hpp"
#include "cpsguard/stealth.hpp"

namespace cpsguard {

// ============================================================================
// Attack strategies
// ============================================================================

enum class AttackKind { None, Covert, ResidueBudget };

struct AttackStrategy {
    AttackKind kind = AttackKind::None;

    // Covert: constant actuator bias (l x 1) on vulnerable steps. The sensor
    // side replays -C xa from an internal copy of the plant driven by the
    // bias that was actually applied, so the residues are untouched.
    Mat covert_input;

    // ResidueBudget: greedy ascent of xbar1^T P1 xbar1 inside the stealthy
    // window budget and the saturation ellipsoid.
    Mat P1;
    double lambda_bar = 0.0;

    static AttackStrategy none() { return {}; }
    static AttackStrategy covert(const Mat& input);
    static AttackStrategy residue_budget(const Mat& P1, double lambda_bar);
};

/// Covert attacker state: xa+ = A xa + B ua, ya = -C xa, xa_0 = 0.
class CovertAttacker {
public:
    explicit CovertAttacker(const PlantModel& model);
    /// Sensor bias to add to the current measurement.
    Mat sensor_bias() const;
    /// Advances xa with the actuator bias applied at this step.
    void advance(const Mat& ua);
    const Mat& state() const { return xa_; }

private:
    Mat A_, B_, C_, xa_;
};

/// One covert step: (ua, ya) = (policy input, -C xa), then xa advances.
std::pair<Mat, Mat> covert_step(CovertAttacker& attacker, const Mat& ua);

/// Data the greedy residue-budget attacker needs.
struct BudgetAttackContext {
    Mat Acal, Kcal, Bcal;
    Mat P1;
    Mat Sigma;
    Mat U;
    double lambda_bar = 0.0;
    std::size_t window = 1;
};

BudgetAttackContext make_budget_context(const AugmentedSystem& aug, const LqgDesign& design, const Mat& U,
                                        const Mat& P1, double lambda_bar, std::size_t window);

struct BudgetAttack {
    Mat ua;  // actuator bias for this step, l x 1
    Mat dz;  // residue bias targeted for the next measurement, m x 1
};

/// Greedy probe. g = P1 Acal xbar1 is the one-step ascent direction of the
/// Lyapunov function. dz maximizes g^T Kcal dz on the ellipsoid
/// dz^T Sigma^-1 dz = r, with r the budget left after the previous T-1 bias
/// terms (recent_terms); ua puts the applied input on the saturation boundary
/// in the direction maximizing g^T Bcal (u + ua). Zero projections fall back
/// to a fixed coordinate direction.
BudgetAttack budget_attack_step(const BudgetAttackContext& ctx, const Mat& xbar1, const Mat& u,
                                std::span<const double> recent_terms);

// ============================================================================
// Closed-loop simulation
// ============================================================================

/// Applied-input saturation: radial projection onto {u : u^T U u <= 1}.
Mat saturate(const Mat& u, const Mat& U);

struct SimSetup {
    PlantModel model;
    LqgDesign design;
    AugmentedSystem aug;
    DetectorConfig detector;
    SafetySpec spec;
    Mat x0;                        // initial estimate xhat_{0|-1} (n x 1); zero if empty
    bool stationary_start = true;  // x_0 = xhat + N(0, P), so residues start stationary
    std::optional<Mat> P2;         // count E2 exits when set
    double p = 0.99;               // E2 probability level
    bool record_states = false;
};

struct TrialResult {
    std::vector<Mat> states;      // xbar_k = [x; x - xhat_{k|k}], k = 0..horizon (recorded on request)
    std::vector<Mat> xbar1;       // attack-driven component (recorded on request)
    std::vector<double> stats;    // detector statistic for each full window
    std::vector<bool> alarms;
    std::vector<double> state_norms;  // ||x_k||, k = 0..horizon
    std::vector<double> dz_terms;     // dz_k^T Sigma^-1 dz_k, one per measurement
    std::size_t attack_steps = 0;
    std::size_t steps = 0;            // completed steps
    bool violation = false;
    double max_ratio = 0.0;           // worst |c^T xbar| / b along the run
    double max_deviation = 0.0;       // worst |c^T xbar| along the run
    double max_input_level = 0.0;     // max applied u^T U u
    double max_abs_dz_gap = 0.0;      // covert runs: max |dz| (should be ~0)
    std::size_t e2_samples = 0;
    std::size_t e2_outside = 0;
    bool diverged = false;
};

/// Runs one trial of `horizon` steps. `vulnerable` must have at least
/// `horizon` entries. Deterministic in (setup, strategy, vulnerable, rng).
TrialResult simulate_trial(const SimSetup& setup, const AttackStrategy& strategy, const std::vector<bool>& vulnerable,
                           std::size_t horizon, RngStream rng);

struct MonteCarloReport {
    std::size_t trials = 0;
    std::size_t horizon = 0;
    std::uint64_t seed = 0;
    std::size_t valid_trials = 0;
    std::size_t diverged_trials = 0;
    std::size_t windows = 0;
    std::size_t alarms = 0;
    double alarm_rate = 0.0;
    double alarm_rate_se = 0.0;      // batch means over trials
    std::size_t violation_trials = 0;
    double violation_rate = 0.0;
    double violation_rate_se = 0.0;
    double max_stat = 0.0;
    double max_state_deviation = 0.0;  // max |c^T xbar| over constraints, trials and steps
    double max_ratio = 0.0;
    double max_input_level = 0.0;
    std::size_t attack_steps = 0;
    std::size_t e2_samples = 0;
    std::size_t e2_outside = 0;
    double e2_outside_rate = 0.0;
    double e2_outside_se = 0.0;
};

/// Trial i uses the stream seeded with seed + i. Trials may run on several
/// threads; the reduction is in trial order, so the report is identical for
/// any thread count.
MonteCarloReport run_monte_carlo(const SimSetup& setup, const AttackStrategy& strategy,
                                 const std::vector<bool>& vulnerable, std::size_t horizon, std::size_t trials,
                                 std::uint64_t seed, std::vector<TrialResult>* keep = nullptr,
                                 unsigned threads = 0);

/// Per-step trajectory rows: trial,k,x_1..x_n,e_1..e_n,norm.
void write_trajectories_csv(std::ostream& os, const std::vector<TrialResult>& trials);

} // namespace cpsguard
