#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cpsguard/lmi.hpp"
#include "cpsguard/matcore.hpp"

namespace cpsguard {

// ============================================================================
// Ellipsoid levels and volumes
// ============================================================================

/// log of max(1, gamma^(k-Ta) gamma_a^Ta), with 0^0 = 1. Throws DomainError
/// for Ta > k, gamma outside [0, 1) or gamma_a < 0.
double e1_log_level(double gamma, double gamma_a, std::size_t k, std::size_t ta);

/// max(1, gamma^(k-Ta) gamma_a^Ta); +inf when the level overflows.
double e1_level(double gamma, double gamma_a, std::size_t k, std::size_t ta);

/// Log-volume surrogates with the unit-ball constant dropped:
///   E1: 2n log(level) - log det P1,   E2: -2n log(1-p) - log det P2.
/// P must be 2n x 2n and SPD.
double log_volume_e1(const Mat& P1, double level, std::size_t n);
double log_volume_e2(const Mat& P2, double p, std::size_t n);

/// Support function of {x^T P1 x <= level1} + {x^T P2 x <= level2} in
/// direction c: sqrt(level1 c^T P1^-1 c) + sqrt(level2 c^T P2^-1 c).
double support_sum(const Mat& P1, double level1, const Mat& P2, double level2, const Mat& c);

// ============================================================================
// Safety specification
// ============================================================================

struct HalfSpacePair {
    Mat direction;  // column c, meaning |c^T xbar| <= bound
    double bound = 0.0;
};

struct SafetySpec {
    std::vector<HalfSpacePair> constraints;

    /// |x_i| <= bound on the physical states i = 0..n-1 of a 2n-dimensional
    /// augmented state (estimation-error block zero-padded).
    static SafetySpec state_box(std::size_t n, double bound);
    /// Throws DomainError on empty directions or nonpositive bounds.
    void validate() const;
    /// Largest |c^T xbar| / b over the constraints; > 1 means a violation.
    double worst_ratio(const Mat& xbar) const;
};

// ============================================================================
// Safe attack time
// ============================================================================

/// Largest Ta in [0, k] whose E1(k, Ta) + E2(p) stays inside every spec
/// constraint. Closed-form per direction, floored, then re-verified by direct
/// support evaluation. Throws InfeasibleError when E2 alone, or E1(0,0) + E2,
/// already leaves the spec.
std::size_t max_ta_bound(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec,
                         std::size_t k);

/// The unfloored closed-form bound, clamped to [0, k]; same errors.
double max_ta_bound_real(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec,
                         std::size_t k);

/// max_ta_bound for k = 0..horizon.
std::vector<std::size_t> bound_curve(const RateCertificate& rate, const InvarianceCertificate& inv,
                                     const SafetySpec& spec, std::size_t horizon);

// ============================================================================
// Response schedules
// ============================================================================

/// Periodic response mechanism; pattern[j] is true when step j of the period
/// is vulnerable to attack.
struct ResponseSchedule {
    std::string name;
    std::vector<bool> pattern;

    std::size_t period() const { return pattern.size(); }
    bool vulnerable(std::size_t k) const { return pattern[k % pattern.size()]; }
    /// Vulnerability flags for steps 0..horizon-1.
    std::vector<bool> mask(std::size_t horizon) const;

    /// From a string of 'T'/'F' (or '1'/'0'). Throws DomainError on other
    /// characters or an empty pattern.
    static ResponseSchedule parse(const std::string& name, const std::string& pattern);
    std::string pattern_string() const;

    static ResponseSchedule mechanism1();  // FFTT
    static ResponseSchedule mechanism2();  // FFTTTTTTTT
};

/// Vulnerable steps among 0..k-1: the attack time that can have reached the
/// state at step k.
std::size_t schedule_tau(const ResponseSchedule& s, std::size_t k);

/// Greedy mask that makes step j vulnerable whenever the cumulative count
/// stays within bound[j+1]; saturates a nondecreasing bound curve.
std::vector<bool> saturating_mask(const std::vector<std::size_t>& bound);

struct StepVerdict {
    std::size_t k = 0;
    std::size_t tau = 0;
    std::size_t bound = 0;
    bool safe = true;
};

struct ScheduleVerdict {
    std::vector<StepVerdict> steps;  // k = 0..horizon
    bool safe = true;                // conjunction over steps
};

ScheduleVerdict schedule_verdict(const ResponseSchedule& s, const RateCertificate& rate,
                                 const InvarianceCertificate& inv, const SafetySpec& spec, std::size_t horizon);
ScheduleVerdict schedule_verdict(const ResponseSchedule& s, const std::vector<std::size_t>& bound);

// ============================================================================
// Volume sweeps (data behind the volume figures)
// ============================================================================

struct SweepPoint {
    double x = 0.0;           // axis value
    double log_volume = 0.0;
};

/// E1 log-volume for Ta = 0..k at fixed k.
std::vector<SweepPoint> sweep_ta(const RateCertificate& rate, std::size_t k);
/// E1 log-volume for k = ta..k_max at fixed Ta.
std::vector<SweepPoint> sweep_k(const RateCertificate& rate, std::size_t ta, std::size_t k_max);
/// E1 log-volume against the fraction Ta/k, Ta = 0..k (k >= 1).
std::vector<SweepPoint> sweep_percentage(const RateCertificate& rate, std::size_t k);
/// E2 log-volume at each probability level.
std::vector<SweepPoint> sweep_p(const InvarianceCertificate& inv, const std::vector<double>& ps);

} // namespace cpsguard
