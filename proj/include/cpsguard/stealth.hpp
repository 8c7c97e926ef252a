#pragma once

#include <cstddef>
#include <deque>
#include <optional>
#include <span>

#include "cpsguard/matcore.hpp"

namespace cpsguard {

// ============================================================================
// Special functions
// ============================================================================

// Regularized incomplete gamma functions P(a, x) and Q(a, x) = 1 - P(a, x).
// Series for x < a + 1, Lentz continued fraction otherwise.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

double chi2_cdf(double dof, double x);
double chi2_survival(double dof, double x);

// Threshold eta with P(dof/2, eta/2) = prob, by bracketing bisection.
// Throws DomainError unless 0 < prob < 1 and dof > 0.
double chi2_quantile(double dof, double prob);

// Generalized Marcum Q-function Q_{half_dof}(sqrt(lambda), sqrt(eta)), i.e. the
// survival function at eta of a noncentral chi-squared variable with
// 2*half_dof degrees of freedom and noncentrality lambda. Evaluated as the
// Poisson(lambda/2)-weighted sum of central survivals, from the modal term
// outward. Throws DomainError for negative lambda/eta or half_dof <= 0.
double marcum_q(double half_dof, double lambda, double eta);

// ============================================================================
// Chi-squared detector
// ============================================================================

struct DetectorConfig {
    std::size_t window = 10;    // T
    std::size_t outputs = 1;    // m
    double eta = 0.0;           // alarm iff g > eta
    double false_alarm = 0.01;

    double dof() const { return static_cast<double>(outputs * window); }
};

// Threshold chosen so the central chi-squared(mT) survival equals false_alarm.
DetectorConfig make_detector(std::size_t outputs, std::size_t window, double false_alarm);

// g = sum_i z_i^T Sigma^-1 z_i over a window of exactly `window` residues.
// Throws DimensionError on a wrong window length.
double detector_stat(std::span<const Mat> residues, const Mat& sigma, std::size_t window);

// Streaming form of the detector used by the simulator.
class ChiSquaredDetector {
public:
    ChiSquaredDetector(const DetectorConfig& cfg, const Mat& sigma);

    // Adds a residue; returns the statistic once the window is full.
    std::optional<double> push(const Mat& z);
    bool alarm(double g) const { return g > cfg_.eta; }
    // z^T Sigma^-1 z
    double weighted_norm2(const Mat& z) const;
    const DetectorConfig& config() const { return cfg_; }

private:
    DetectorConfig cfg_;
    Mat chol_;  // lower Cholesky factor of Sigma
    std::deque<double> terms_;
};

// ============================================================================
// Stealthy bias sets
// ============================================================================

struct StealthBudget {
    double p_d = 0.0;
    double lambda_bar = 0.0;
    // Finite stealth horizon k'. Absent means p_d-stealthy for all time, which
    // is what the downstream analysis uses.
    std::optional<std::size_t> horizon;
};

// Largest noncentrality with detection probability p_d. Throws
// InfeasibleError when p_d is below the false-alarm rate and DomainError
// when p_d >= 1.
StealthBudget solve_lambda_bar(const DetectorConfig& cfg, double p_d);

// dz^T Sigma^-1 dz <= lambda_bar (+1e-12).
bool in_stealthy_set(const Mat& dz, const Mat& sigma, const StealthBudget& budget);

// Windowed sum of dz_i^T Sigma^-1 dz_i <= lambda_bar (+1e-12).
bool window_budget_ok(std::span<const Mat> dz_window, const Mat& sigma, const StealthBudget& budget);

// Markov-inequality budget eta * p_d - mT. Nonpositive means the guaranteed
// stealthy set it describes is empty.
double alternate_budget(const DetectorConfig& cfg, double p_d);

} // namespace cpsguard
