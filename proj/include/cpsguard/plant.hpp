#pragma once

#include <cstdint>
#include <vector>

#include "cpsguard/matcore.hpp"

namespace cpsguard {

/// Discrete LTI plant x+ = A x + B u + w, y = C x + v with w ~ N(0,Q),
/// v ~ N(0,R), and the actuator saturation ellipsoid {u : u^T U u <= 1}.
struct PlantModel {
    Mat A;  // n x n
    Mat B;  // n x l
    Mat C;  // m x n
    Mat Q;  // n x n, PSD
    Mat R;  // m x m, PD
    Mat U;  // l x l, PD
    double sample_period = 1.0;  // seconds

    std::size_t n() const { return A.rows(); }
    std::size_t m() const { return C.rows(); }
    std::size_t l() const { return B.cols(); }

    // Throws DimensionError / DomainError when an invariant is violated.
    void validate() const;
};

/// Steady-state LQG loop: Kalman filter gains and the LQR feedback u = L xhat.
struct LqgDesign {
    Mat K;      // n x m Kalman gain, K = P C^T Sigma^-1
    Mat P;      // n x n a priori error covariance
    Mat Sigma;  // m x m innovation covariance C P C^T + R
    Mat L;      // l x n control gain
    Mat S;      // n x n control Riccati solution
    Mat W;      // LQR state weight
    Mat V;      // LQR input weight
};

/// Joint state / a posteriori estimation-error dynamics
///   xbar+ = Acal xbar + Ical w + Kcal (z + dz) + Bcal ua,  xbar = [x; e].
struct AugmentedSystem {
    Mat Acal;  // 2n x 2n  [A+BL, -BL; 0, A]
    Mat Ical;  // 2n x n   [I; I]
    Mat Kcal;  // 2n x m   [0; -K]
    Mat Bcal;  // 2n x l   [B; B]
    Mat Kbar;  // 2n x (n+m)  [Ical, Kcal]
    Mat Rcal;  // (n+m) x (n+m)  BlkDiag(Q, Sigma)
    Mat Lbar;  // l x 2n   [L, -L]

    std::size_t dim() const { return Acal.rows(); }
};

LqgDesign synthesize_lqg(const PlantModel& model, const Mat& W, const Mat& V);

AugmentedSystem build_augmented(const PlantModel& model, const LqgDesign& design);

/// Residue bias of an input/output attack, propagated in state form:
///   xi+ = A (I - K C) xi + B ua - A K ya,   dz = ya + C xi.
class ResidueBiasTracker {
public:
    ResidueBiasTracker(const PlantModel& model, const LqgDesign& design);

    // Bias on the residue at the current step given this step's output bias.
    Mat bias(const Mat& ya) const;
    // Advances one step with the attack applied at the current step.
    void advance(const Mat& ua, const Mat& ya);
    const Mat& state() const { return xi_; }

private:
    Mat prop_;   // A (I - K C)
    Mat B_;
    Mat AK_;
    Mat C_;
    Mat xi_;
};

/// dz_k for the given attack histories. ua_hist needs entries 0..k-1 and
/// ya_hist entries 0..k; throws DimensionError otherwise.
Mat residue_bias(const PlantModel& model, const LqgDesign& design, const std::vector<Mat>& ua_hist,
                 const std::vector<Mat>& ya_hist, std::size_t k);

// ============================================================================
// Quadruple-tank benchmark
// ============================================================================

/// Physical parameters of the four-tank process linearized about an
/// operating point. Units: cm, s, V. Defaults are the minimum-phase operating
/// point of the standard laboratory rig (Johansson, 2000) with a 1.5 cm^2
/// outlet hole on every tank; config/quadruple_tank.cfg ships the same values.
struct TankParameters {
    double area[4] = {28.0, 32.0, 28.0, 32.0};   // tank cross-sections A_i
    double outlet[4] = {1.5, 1.5, 1.5, 1.5};     // outlet hole cross-sections a_i
    double level0[4] = {12.4, 12.7, 1.8, 1.4};   // operating levels h_i^0
    double voltage0[2] = {3.0, 3.0};             // pump operating voltages v_i^0
    double pump_gain[2] = {3.33, 3.35};          // k_i, cm^3 / (V s)
    double valve_split[2] = {0.70, 0.60};        // gamma_i
    double sensor_gain = 0.50;                   // k_c, V / cm
    double gravity = 981.0;                      // cm / s^2
    double sample_period = 2.0;                  // s
};

/// Continuous-time linearization (A_c, B_c, C) of the tank process.
struct ContinuousModel {
    Mat A;
    Mat B;
    Mat C;
};
ContinuousModel tank_continuous_model(const TankParameters& p);

/// Zero-order-hold discretization: returns (A_d, B_d).
std::pair<Mat, Mat> discretize_zoh(const Mat& a, const Mat& b, double period);

struct PlantSetup {
    PlantModel model;
    Mat W;
    Mat V;
};

/// Quadruple-tank instance. Q and R are M M^T / 100 with M drawn i.i.d.
/// Uniform[0,1) from the seeded stream (Q first, then R); W = I, V = 100 I.
PlantSetup quadruple_tank(std::uint64_t seed, const TankParameters& params = {});

} // namespace cpsguard
