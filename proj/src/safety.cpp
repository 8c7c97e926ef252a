#include "cpsguard/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cpsguard {

// ============================================================================
// Levels and volumes
// ============================================================================

double e1_log_level(double gamma, double gamma_a, std::size_t k, std::size_t ta) {
    if (ta > k) throw DomainError("e1_level: Ta exceeds k");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("e1_level: gamma must lie in [0, 1)");
    if (!(gamma_a >= 0.0) || !std::isfinite(gamma_a)) throw DomainError("e1_level: gamma_a must be nonnegative");
    const std::size_t normal = k - ta;
    const double a = normal > 0 ? static_cast<double>(normal) * std::log(gamma) : 0.0;
    const double b = ta > 0 ? static_cast<double>(ta) * std::log(gamma_a) : 0.0;
    return std::max(0.0, a + b);
}

double e1_level(double gamma, double gamma_a, std::size_t k, std::size_t ta) {
    return std::exp(e1_log_level(gamma, gamma_a, k, ta));
}

namespace {

void require_shape_2n(const Mat& P, std::size_t n, const char* what) {
    if (P.rows() != 2 * n || P.cols() != 2 * n) throw DimensionError(std::string(what) + ": shape must be 2n x 2n");
}

// c^T P^-1 c for SPD P.
double inverse_quad(const Mat& P, const Mat& c) {
    if (c.cols() != 1 || c.rows() != P.rows()) throw DimensionError("support_sum: direction has wrong dimension");
    Mat lower;
    if (!try_cholesky(P, lower)) throw DomainError("support_sum: shape is not positive definite");
    // ||L^-1 c||^2 by forward substitution.
    double s = 0.0;
    std::vector<double> y(c.rows());
    for (std::size_t i = 0; i < c.rows(); ++i) {
        double v = c[i];
        for (std::size_t j = 0; j < i; ++j) v -= lower(i, j) * y[j];
        y[i] = v / lower(i, i);
        s += y[i] * y[i];
    }
    return s;
}

} // namespace

double log_volume_e1(const Mat& P1, double level, std::size_t n) {
    require_shape_2n(P1, n, "log_volume_e1");
    if (!(level > 0.0)) throw DomainError("log_volume_e1: level must be positive");
    return 2.0 * static_cast<double>(n) * std::log(level) - logdet(P1);
}

double log_volume_e2(const Mat& P2, double p, std::size_t n) {
    require_shape_2n(P2, n, "log_volume_e2");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("log_volume_e2: p must lie in (0, 1)");
    return -2.0 * static_cast<double>(n) * std::log1p(-p) - logdet(P2);
}

double support_sum(const Mat& P1, double level1, const Mat& P2, double level2, const Mat& c) {
    if (c.max_abs() == 0.0) throw DomainError("support_sum: direction must be nonzero");
    if (!(level1 >= 0.0) || !(level2 >= 0.0)) throw DomainError("support_sum: levels must be nonnegative");
    return std::sqrt(level1 * inverse_quad(P1, c)) + std::sqrt(level2 * inverse_quad(P2, c));
}

// ============================================================================
// Safety spec
// ============================================================================

SafetySpec SafetySpec::state_box(std::size_t n, double bound) {
    SafetySpec spec;
    for (std::size_t i = 0; i < n; ++i) spec.constraints.push_back({Mat::unit(2 * n, i), bound});
    spec.validate();
    return spec;
}

void SafetySpec::validate() const {
    if (constraints.empty()) throw DomainError("SafetySpec: no constraints");
    const std::size_t dim = constraints.front().direction.rows();
    for (const auto& h : constraints) {
        if (h.direction.cols() != 1 || h.direction.rows() != dim) {
            throw DimensionError("SafetySpec: directions must be columns of equal length");
        }
        if (h.direction.max_abs() == 0.0) throw DomainError("SafetySpec: zero direction");
        if (!(h.bound > 0.0)) throw DomainError("SafetySpec: bounds must be positive");
    }
}

double SafetySpec::worst_ratio(const Mat& xbar) const {
    double worst = 0.0;
    for (const auto& h : constraints) worst = std::max(worst, std::abs(dot(h.direction, xbar)) / h.bound);
    return worst;
}

// ============================================================================
// Safe attack time
// ============================================================================

namespace {

double e2_level(double p) { return 1.0 / (1.0 - p); }

// min over constraints of log(((b - s2)^2) / (c^T P1^-1 c)): the largest E1
// level that still fits, in log form.
double log_level_budget(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec) {
    spec.validate();
    const double level2 = e2_level(inv.p);
    double budget = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.constraints.size(); ++i) {
        const auto& h = spec.constraints[i];
        const double s2 = std::sqrt(level2 * inverse_quad(inv.P2, h.direction));
        const double margin = h.bound - s2;
        if (!(margin > 0.0)) {
            throw InfeasibleError("max_ta_bound: E2(p) alone reaches " + std::to_string(s2) +
                                  " along constraint " + std::to_string(i) + " with bound " +
                                  std::to_string(h.bound) + "; no attack time can be certified at this p");
        }
        budget = std::min(budget, 2.0 * std::log(margin) - std::log(inverse_quad(rate.P1, h.direction)));
    }
    if (budget < 0.0) {
        throw InfeasibleError("max_ta_bound: E1(0,0) + E2(p) already exceeds the safety spec (log level budget " +
                              std::to_string(budget) + ")");
    }
    return budget;
}

bool fits(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec, std::size_t k,
          std::size_t ta) {
    const double level1 = e1_level(rate.gamma, rate.gamma_a, k, ta);
    if (!std::isfinite(level1)) return false;
    const double level2 = e2_level(inv.p);
    for (const auto& h : spec.constraints) {
        if (support_sum(rate.P1, level1, inv.P2, level2, h.direction) > h.bound) return false;
    }
    return true;
}

double real_bound(const RateCertificate& rate, double budget, std::size_t k) {
    const double kd = static_cast<double>(k);
    if (k == 0 || rate.gamma_a <= rate.gamma) return kd;
    const double lga = std::log(rate.gamma_a);
    if (rate.gamma == 0.0) {
        // Any normal step zeroes the product; only Ta = k carries a level.
        return kd * lga <= budget ? kd : kd - 1.0;
    }
    const double lg = std::log(rate.gamma);
    return std::clamp((budget - kd * lg) / (lga - lg), 0.0, kd);
}

} // namespace

double max_ta_bound_real(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec,
                         std::size_t k) {
    return real_bound(rate, log_level_budget(rate, inv, spec), k);
}

std::size_t max_ta_bound(const RateCertificate& rate, const InvarianceCertificate& inv, const SafetySpec& spec,
                         std::size_t k) {
    const double budget = log_level_budget(rate, inv, spec);
    auto ta = static_cast<std::size_t>(std::floor(real_bound(rate, budget, k)));
    ta = std::min(ta, k);
    while (ta < k && fits(rate, inv, spec, k, ta + 1)) ++ta;
    while (ta > 0 && !fits(rate, inv, spec, k, ta)) --ta;
    if (!fits(rate, inv, spec, k, ta)) {
        throw InfeasibleError("max_ta_bound: E1(0,0) + E2(p) exceeds the safety spec at k = " + std::to_string(k));
    }
    return ta;
}

std::vector<std::size_t> bound_curve(const RateCertificate& rate, const InvarianceCertificate& inv,
                                     const SafetySpec& spec, std::size_t horizon) {
    std::vector<std::size_t> out(horizon + 1);
    for (std::size_t k = 0; k <= horizon; ++k) out[k] = max_ta_bound(rate, inv, spec, k);
    return out;
}

// ============================================================================
// Schedules
// ============================================================================

std::vector<bool> ResponseSchedule::mask(std::size_t horizon) const {
    std::vector<bool> m(horizon);
    for (std::size_t k = 0; k < horizon; ++k) m[k] = vulnerable(k);
    return m;
}

ResponseSchedule ResponseSchedule::parse(const std::string& name, const std::string& pattern) {
    ResponseSchedule s;
    s.name = name;
    for (char ch : pattern) {
        if (ch == 'T' || ch == 't' || ch == '1') {
            s.pattern.push_back(true);
        } else if (ch == 'F' || ch == 'f' || ch == '0') {
            s.pattern.push_back(false);
        } else {
            throw DomainError("ResponseSchedule: pattern may only contain T/F or 1/0, got '" + pattern + "'");
        }
    }
    if (s.pattern.empty()) throw DomainError("ResponseSchedule: empty pattern");
    return s;
}

std::string ResponseSchedule::pattern_string() const {
    std::string out;
    for (bool b : pattern) out.push_back(b ? 'T' : 'F');
    return out;
}

ResponseSchedule ResponseSchedule::mechanism1() { return parse("mechanism1", "FFTT"); }
ResponseSchedule ResponseSchedule::mechanism2() { return parse("mechanism2", "FFTTTTTTTT"); }

std::size_t schedule_tau(const ResponseSchedule& s, std::size_t k) {
    const std::size_t period = s.period();
    std::size_t per_period = 0;
    for (bool b : s.pattern) per_period += b ? 1 : 0;
    std::size_t tau = (k / period) * per_period;
    for (std::size_t j = 0; j < k % period; ++j) tau += s.pattern[j] ? 1 : 0;
    return tau;
}

std::vector<bool> saturating_mask(const std::vector<std::size_t>& bound) {
    if (bound.empty()) return {};
    std::vector<bool> m(bound.size() - 1);
    std::size_t tau = 0;
    for (std::size_t j = 0; j + 1 < bound.size(); ++j) {
        if (tau + 1 <= bound[j + 1]) {
            m[j] = true;
            ++tau;
        }
    }
    return m;
}

ScheduleVerdict schedule_verdict(const ResponseSchedule& s, const std::vector<std::size_t>& bound) {
    ScheduleVerdict v;
    v.steps.reserve(bound.size());
    for (std::size_t k = 0; k < bound.size(); ++k) {
        StepVerdict sv;
        sv.k = k;
        sv.tau = schedule_tau(s, k);
        sv.bound = bound[k];
        sv.safe = sv.tau <= sv.bound;
        v.safe = v.safe && sv.safe;
        v.steps.push_back(sv);
    }
    return v;
}

ScheduleVerdict schedule_verdict(const ResponseSchedule& s, const RateCertificate& rate,
                                 const InvarianceCertificate& inv, const SafetySpec& spec, std::size_t horizon) {
    return schedule_verdict(s, bound_curve(rate, inv, spec, horizon));
}

// ============================================================================
// Sweeps
// ============================================================================

namespace {

double e1_log_volume(const RateCertificate& rate, double log_det, std::size_t k, std::size_t ta) {
    return static_cast<double>(rate.P1.rows()) * e1_log_level(rate.gamma, rate.gamma_a, k, ta) - log_det;
}

} // namespace

std::vector<SweepPoint> sweep_ta(const RateCertificate& rate, std::size_t k) {
    const double ld = logdet(rate.P1);
    std::vector<SweepPoint> out;
    for (std::size_t ta = 0; ta <= k; ++ta) out.push_back({static_cast<double>(ta), e1_log_volume(rate, ld, k, ta)});
    return out;
}

std::vector<SweepPoint> sweep_k(const RateCertificate& rate, std::size_t ta, std::size_t k_max) {
    const double ld = logdet(rate.P1);
    std::vector<SweepPoint> out;
    for (std::size_t k = ta; k <= k_max; ++k) out.push_back({static_cast<double>(k), e1_log_volume(rate, ld, k, ta)});
    return out;
}

std::vector<SweepPoint> sweep_percentage(const RateCertificate& rate, std::size_t k) {
    if (k == 0) throw DomainError("sweep_percentage: k must be positive");
    const double ld = logdet(rate.P1);
    std::vector<SweepPoint> out;
    for (std::size_t ta = 0; ta <= k; ++ta) {
        out.push_back({static_cast<double>(ta) / static_cast<double>(k), e1_log_volume(rate, ld, k, ta)});
    }
    return out;
}

std::vector<SweepPoint> sweep_p(const InvarianceCertificate& inv, const std::vector<double>& ps) {
    const std::size_t n = inv.P2.rows() / 2;
    std::vector<SweepPoint> out;
    for (double p : ps) out.push_back({p, log_volume_e2(inv.P2, p, n)});
    return out;
}

} // namespace cpsguard
