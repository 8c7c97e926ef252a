#include "cpsguard/stealth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace cpsguard {

// ============================================================================
// Incomplete gamma
// ============================================================================

namespace {

constexpr double kGammaEps = 1e-14;
constexpr int kGammaMaxIter = 100000;

// P(a, x) by its power series; valid and fast for x < a + 1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < kGammaMaxIter; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::abs(del) < std::abs(sum) * kGammaEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the modified Lentz continued fraction; for x >= a + 1.
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kGammaMaxIter; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kGammaEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

void check_gamma_args(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0) || std::isnan(x)) {
        throw DomainError("incomplete gamma: requires a > 0 and x >= 0");
    }
}

} // namespace

double gamma_p(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_fraction(a, x);
}

double chi2_cdf(double dof, double x) { return gamma_p(0.5 * dof, 0.5 * x); }
double chi2_survival(double dof, double x) { return gamma_q(0.5 * dof, 0.5 * x); }

double chi2_quantile(double dof, double prob) {
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("chi2_quantile: prob must lie in (0, 1)");
    if (!(dof > 0.0)) throw DomainError("chi2_quantile: dof must be positive");
    double lo = 0.0;
    double hi = std::max(dof, 1.0);
    while (chi2_cdf(dof, hi) < prob) hi *= 2.0;
    for (int it = 0; it < 400 && hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (chi2_cdf(dof, mid) < prob) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// ============================================================================
// Marcum Q
// ============================================================================

double marcum_q(double half_dof, double lambda, double eta) {
    if (!(half_dof > 0.0)) throw DomainError("marcum_q: half_dof must be positive");
    if (!(lambda >= 0.0) || !(eta >= 0.0)) throw DomainError("marcum_q: lambda and eta must be nonnegative");
    const double x = 0.5 * eta;
    if (x == 0.0) return 1.0;
    const double mu = 0.5 * lambda;
    if (mu == 0.0) return gamma_q(half_dof, x);

    auto log_weight = [mu](double j) { return -mu + j * std::log(mu) - std::lgamma(j + 1.0); };
    const double mode = std::floor(mu);

    double total = 0.0;
    double weight_sum = 0.0;
    // Downward from the mode (inclusive), then upward.
    for (double j = mode; j >= 0.0; j -= 1.0) {
        const double w = std::exp(log_weight(j));
        total += w * gamma_q(half_dof + j, x);
        weight_sum += w;
        if (weight_sum > 1.0 - 1e-14 || (w < 1e-300 && j < mode)) break;
    }
    for (double j = mode + 1.0; weight_sum <= 1.0 - 1e-14; j += 1.0) {
        const double w = std::exp(log_weight(j));
        total += w * gamma_q(half_dof + j, x);
        weight_sum += w;
        if (w < 1e-300 && j > mu) break;
    }
    return std::clamp(total, 0.0, 1.0);
}

// ============================================================================
// Detector
// ============================================================================

DetectorConfig make_detector(std::size_t outputs, std::size_t window, double false_alarm) {
    if (outputs == 0 || window == 0) throw DomainError("make_detector: outputs and window must be positive");
    DetectorConfig cfg;
    cfg.outputs = outputs;
    cfg.window = window;
    cfg.false_alarm = false_alarm;
    cfg.eta = chi2_quantile(cfg.dof(), 1.0 - false_alarm);
    return cfg;
}

namespace {

double whitened_norm2(const Mat& chol, const Mat& z) {
    if (z.rows() != chol.rows() || z.cols() != 1) throw DimensionError("residue has wrong dimension");
    // Forward substitution L y = z; returns ||y||^2 = z^T Sigma^-1 z.
    const std::size_t m = chol.rows();
    std::vector<double> y(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double v = z[i];
        for (std::size_t k = 0; k < i; ++k) v -= chol(i, k) * y[k];
        y[i] = v / chol(i, i);
        s += y[i] * y[i];
    }
    return s;
}

} // namespace

double detector_stat(std::span<const Mat> residues, const Mat& sigma, std::size_t window) {
    if (residues.size() != window) {
        throw DimensionError("detector_stat: expected window of " + std::to_string(window) + " residues, got " +
                             std::to_string(residues.size()));
    }
    const Mat chol = cholesky(sigma);
    double g = 0.0;
    for (const Mat& z : residues) g += whitened_norm2(chol, z);
    return g;
}

ChiSquaredDetector::ChiSquaredDetector(const DetectorConfig& cfg, const Mat& sigma)
    : cfg_(cfg), chol_(cholesky(sigma)) {
    if (sigma.rows() != cfg.outputs) throw DimensionError("ChiSquaredDetector: Sigma does not match outputs");
}

double ChiSquaredDetector::weighted_norm2(const Mat& z) const { return whitened_norm2(chol_, z); }

std::optional<double> ChiSquaredDetector::push(const Mat& z) {
    terms_.push_back(weighted_norm2(z));
    if (terms_.size() > cfg_.window) terms_.pop_front();
    if (terms_.size() < cfg_.window) return std::nullopt;
    double g = 0.0;
    for (double t : terms_) g += t;
    return g;
}

// ============================================================================
// Stealthy sets
// ============================================================================

StealthBudget solve_lambda_bar(const DetectorConfig& cfg, double p_d) {
    if (!(p_d < 1.0)) throw DomainError("solve_lambda_bar: p_d must be below 1");
    if (!(p_d > 0.0)) throw DomainError("solve_lambda_bar: p_d must be positive");
    const double half = 0.5 * cfg.dof();
    const double q0 = marcum_q(half, 0.0, cfg.eta);
    if (p_d < q0 - 1e-10) {
        throw InfeasibleError("solve_lambda_bar: stealthiness level " + std::to_string(p_d) +
                              " is below the false-alarm rate " + std::to_string(q0));
    }
    StealthBudget budget;
    budget.p_d = p_d;
    if (p_d <= q0 + 1e-12) {
        budget.lambda_bar = 0.0;
        return budget;
    }
    double lo = 0.0;
    double hi = cfg.dof();
    while (marcum_q(half, hi, cfg.eta) <= p_d) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        if (marcum_q(half, mid, cfg.eta) <= p_d) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    budget.lambda_bar = lo;
    return budget;
}

bool in_stealthy_set(const Mat& dz, const Mat& sigma, const StealthBudget& budget) {
    return whitened_norm2(cholesky(sigma), dz) <= budget.lambda_bar + 1e-12;
}

bool window_budget_ok(std::span<const Mat> dz_window, const Mat& sigma, const StealthBudget& budget) {
    const Mat chol = cholesky(sigma);
    double s = 0.0;
    for (const Mat& dz : dz_window) s += whitened_norm2(chol, dz);
    return s <= budget.lambda_bar + 1e-12;
}

double alternate_budget(const DetectorConfig& cfg, double p_d) { return cfg.eta * p_d - cfg.dof(); }

} // namespace cpsguard
