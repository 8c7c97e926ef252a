#pragma once

#include <cstddef>
#include <vector>

#include "cpsguard/matcore.hpp"
#include "cpsguard/plant.hpp"

namespace cpsguard {

/// Lyapunov rate certificate for the attack-driven state component xbar1:
///   normal step:  V+ <= gamma   V                (gamma P1 - Acal^T P1 Acal >= 0)
///   attack step:  V+ <= gamma_a V  whenever V >= 1 (S-procedure block >= 0)
/// with V = xbar1^T P1 xbar1.
struct RateCertificate {
    Mat P1;
    double gamma = 0.0;
    double gamma_a = 0.0;
    double alpha1 = 0.0;
    double alpha3 = 0.0;  // multiplier of the operating-region constraint
};

/// Probabilistic invariance certificate for the noise-driven component xbar2:
/// {x : x^T P2 x <= 1/(1-p)} holds xbar2 with probability at least p.
struct InvarianceCertificate {
    Mat P2;
    double alpha2 = 0.0;
    double p = 0.0;
};

/// Attack-side quantities the rate LMI depends on.
struct AttackBounds {
    Mat U;                    // actuator saturation shape
    Mat Sigma;                // innovation covariance
    double lambda_bar = 0.0;  // stealthy bias budget
};

enum class P2Method {
    Scaling,  // P2 = beta * dlyap(Acal^T, I)
    MaxDet,   // full matrix, log-barrier maximization of log det P2
};

struct LmiOptions {
    double alpha1_min = 1e-6;
    double alpha1_max = 1e3;
    std::size_t alpha1_points = 181;
    double alpha2_min = 1e-6;
    double alpha2_max = 1.0;
    std::size_t alpha2_points = 101;
    double alpha2_margin = 0.999;  // alpha2 <= margin / lambda_max(P_hat)
    // alpha3 = ratio * alpha1 for each ratio listed; 0 keeps the bare block.
    std::vector<double> alpha3_ratios = {0.0, 0.01, 0.0316227766016838, 0.1, 0.316227766016838, 1.0,
                                         3.16227766016838, 10.0, 31.6227766016838, 100.0};
    double gamma_a_cap = 1048576.0;  // 2^20
    double bisection_tol = 1e-10;    // relative
    P2Method p2_method = P2Method::MaxDet;
    double barrier_mu_final = 1e-9;  // last barrier weight of the maxdet solve
    // Objective weights of the joint design program. The sequential procedure
    // implemented here does not use them; they are carried for reporting only.
    double omega1 = 1.0;
    double omega2 = 1.0;
    double omega3 = 1.0;
};

// ============================================================================
// Matrix-inequality blocks
// ============================================================================

/// gamma P1 - Acal^T P1 Acal (must be PSD).
Mat rate_block(const AugmentedSystem& aug, const Mat& P1, double gamma);

/// The symmetric [G11 G12; G12^T G22] block of the attack-rate LMI over
/// xi = [xbar1; xbar2; dz; ua], of size 2n + 2n + m + l (must be PSD).
///
/// With alpha3 = 0 this is the bare S-procedure block. That block is never PSD
/// when Bcal has full column rank and Lbar is onto: along xi = (0, v, 0, u)
/// with Lbar v = -u it evaluates to -u^T Bcal^T P1 Bcal u. A positive alpha3
/// adds the operating-region constraint xbar^T Lbar^T U Lbar xbar <= 1
/// (homogenized against xbar1^T P1 xbar1 >= 1), i.e. alpha3 times
///   [Lbar^T U Lbar - P1, Lbar^T U Lbar; Lbar^T U Lbar, Lbar^T U Lbar]
/// on the (xbar1, xbar2) rows.
Mat build_gamma_a_blocks(const AugmentedSystem& aug, const Mat& P1, const AttackBounds& bounds, double gamma_a,
                         double alpha1, double alpha3 = 0.0);

/// The probabilistic-boundedness block over [xbar2; wbar] (must be NSD).
Mat invariance_block(const AugmentedSystem& aug, const Mat& P2, double alpha2);

// ============================================================================
// Sequential synthesis
// ============================================================================

struct P1Gamma {
    Mat P1;
    double gamma = 0.0;
};

/// P1 = scale * dlyap(Acal^T, I) and the smallest gamma with
/// gamma P1 >= Acal^T P1 Acal (gamma does not depend on the scale).
/// Throws InstabilityError unless rho(Acal) < 1.
P1Gamma synthesize_p1_gamma(const AugmentedSystem& aug, double scale = 1.0);

/// Grid over (alpha1, alpha3), bisection over gamma_a; returns the point with
/// minimal gamma_a, ties going to the smaller grid index. Throws
/// InfeasibleError, quoting the best violation margin, if no grid point
/// admits a certificate.
RateCertificate synthesize_gamma_a(const AugmentedSystem& aug, const P1Gamma& p1, const AttackBounds& bounds,
                                   const LmiOptions& opts = {});

/// Scaling-family search P2 = beta * P_hat, P_hat = dlyap(Acal^T, I); grid
/// over alpha2 (restricted below margin / lambda_max(P_hat)), bisection for
/// the largest feasible beta, best log det over the grid.
InvarianceCertificate synthesize_p2_scaling(const AugmentedSystem& aug, double p, const LmiOptions& opts = {});

/// Same alpha2 grid, but for each alpha2 maximizes log det P2 over all SPD
/// matrices by a damped-Newton log-barrier method started from half the
/// scaling-family optimum. The returned P2 is strictly interior.
InvarianceCertificate synthesize_p2_maxdet(const AugmentedSystem& aug, double p, const LmiOptions& opts = {});

/// Dispatches on opts.p2_method.
InvarianceCertificate synthesize_p2(const AugmentedSystem& aug, double p, const LmiOptions& opts = {});

// ============================================================================
// Verification
// ============================================================================

struct CertificateReport {
    double rate_margin = 0.0;        // min eig of the rate block
    double attack_margin = 0.0;      // min eig of the attack-rate block
    double invariance_margin = 0.0;  // -max eig of the invariance block
    double p1_min_eig = 0.0;
    double p2_min_eig = 0.0;
    bool scalars_ok = false;         // gamma in [0,1), gamma_a, alphas >= 0, p in (0,1)
    bool accepted = false;

    static constexpr double kTolerance = 1e-8;
};

CertificateReport check_certificates(const AugmentedSystem& aug, const AttackBounds& bounds,
                                     const RateCertificate& rate, const InvarianceCertificate& inv);

} // namespace cpsguard
