#include "cpsguard/lmi.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace cpsguard {

namespace {

void require_shape(const Mat& m, std::size_t rows, std::size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                             ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

std::vector<double> logspace(double lo, double hi, std::size_t points) {
    std::vector<double> out(points);
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
        out[i] = std::pow(10.0, a + t * (b - a));
    }
    return out;
}

bool is_pd(const Mat& m) {
    Mat lower;
    return try_cholesky(m, lower);
}

// Products of P1 with the augmented matrices, shared by every grid point.
struct AttackTerms {
    std::size_t d = 0, m = 0, l = 0;
    Mat P1, AtPA, AtPK, AtPB, KtPK, KtPB, BtPB, LtUL, LtU, SigmaInv, U;
    double lambda_bar = 0.0;
};

AttackTerms attack_terms(const AugmentedSystem& aug, const Mat& P1, const AttackBounds& bounds) {
    AttackTerms t;
    t.d = aug.dim();
    t.m = aug.Kcal.cols();
    t.l = aug.Bcal.cols();
    require_shape(P1, t.d, t.d, "P1");
    require_shape(bounds.U, t.l, t.l, "U");
    require_shape(bounds.Sigma, t.m, t.m, "Sigma");
    require_shape(aug.Lbar, t.l, t.d, "Lbar");
    if (!(bounds.lambda_bar > 0.0)) throw DomainError("attack-rate block: lambda_bar must be positive");

    const Mat at = aug.Acal.transpose();
    const Mat kt = aug.Kcal.transpose();
    const Mat bt = aug.Bcal.transpose();
    const Mat lt = aug.Lbar.transpose();
    t.P1 = P1;
    t.AtPA = symmetrize(at * P1 * aug.Acal);
    t.AtPK = at * P1 * aug.Kcal;
    t.AtPB = at * P1 * aug.Bcal;
    t.KtPK = symmetrize(kt * P1 * aug.Kcal);
    t.KtPB = kt * P1 * aug.Bcal;
    t.BtPB = symmetrize(bt * P1 * aug.Bcal);
    t.LtUL = symmetrize(lt * bounds.U * aug.Lbar);
    t.LtU = lt * bounds.U;
    t.SigmaInv = symmetrize(inverse(bounds.Sigma));
    t.U = bounds.U;
    t.lambda_bar = bounds.lambda_bar;
    return t;
}

Mat assemble(const AttackTerms& t, double gamma_a, double alpha1, double alpha3) {
    const std::size_t d = t.d, m = t.m;
    const std::size_t x2 = d, dz = 2 * d, ua = 2 * d + m;
    Mat g(2 * d + m + t.l, 2 * d + m + t.l);

    const double region = alpha1 + alpha3;
    const Mat ltul = t.LtUL * region;
    g.set_block(0, 0, t.P1 * (gamma_a - 2.0 * alpha1 - alpha3) - t.AtPA + ltul);
    g.set_block(0, x2, ltul);
    g.set_block(x2, 0, ltul);
    g.set_block(x2, x2, ltul);

    const Mat g13 = -t.AtPK;
    const Mat g14 = t.LtU * alpha1 - t.AtPB;
    const Mat g24 = t.LtU * alpha1;
    g.set_block(0, dz, g13);
    g.set_block(dz, 0, g13.transpose());
    g.set_block(0, ua, g14);
    g.set_block(ua, 0, g14.transpose());
    g.set_block(x2, ua, g24);
    g.set_block(ua, x2, g24.transpose());

    const Mat g34 = -t.KtPB;
    g.set_block(dz, dz, t.SigmaInv * (alpha1 / t.lambda_bar) - t.KtPK);
    g.set_block(dz, ua, g34);
    g.set_block(ua, dz, g34.transpose());
    g.set_block(ua, ua, t.U * alpha1 - t.BtPB);
    return g;
}

// Orthonormal basis (columns) of range(Lbar^T). Directions (0, v, 0, 0) with
// Lbar v = 0 are exact null vectors of the attack-rate block, so PSD-ness is
// decided on the complement; without this the block is never strictly PD
// and a Cholesky-based feasibility test would always fail.
Mat compression(const AttackTerms& t, const Mat& lbar) {
    const SymEigDecomp eig = sym_eig(symmetrize(lbar.transpose() * lbar));
    const double top = eig.eigenvalues.empty() ? 0.0 : eig.eigenvalues.back();
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < eig.eigenvalues.size(); ++i) {
        if (eig.eigenvalues[i] > 1e-12 * top && top > 0.0) keep.push_back(i);
    }
    const std::size_t r = keep.size();
    const std::size_t full = 2 * t.d + t.m + t.l;
    const std::size_t reduced = t.d + r + t.m + t.l;
    Mat z(full, reduced);
    for (std::size_t i = 0; i < t.d; ++i) z(i, i) = 1.0;
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < t.d; ++i) z(t.d + i, t.d + j) = eig.eigenvectors(i, keep[j]);
    for (std::size_t i = 0; i < t.m + t.l; ++i) z(2 * t.d + i, t.d + r + i) = 1.0;
    return z;
}

} // namespace

// ============================================================================
// Blocks
// ============================================================================

Mat rate_block(const AugmentedSystem& aug, const Mat& P1, double gamma) {
    require_shape(P1, aug.dim(), aug.dim(), "P1");
    return symmetrize(P1 * gamma - aug.Acal.transpose() * P1 * aug.Acal);
}

Mat build_gamma_a_blocks(const AugmentedSystem& aug, const Mat& P1, const AttackBounds& bounds, double gamma_a,
                         double alpha1, double alpha3) {
    return assemble(attack_terms(aug, P1, bounds), gamma_a, alpha1, alpha3);
}

Mat invariance_block(const AugmentedSystem& aug, const Mat& P2, double alpha2) {
    const std::size_t d = aug.dim();
    const std::size_t nw = aug.Kbar.cols();
    require_shape(P2, d, d, "P2");
    require_shape(aug.Kbar, d, nw, "Kbar");
    require_shape(aug.Rcal, nw, nw, "Rcal");
    const Mat at = aug.Acal.transpose();
    const Mat kt = aug.Kbar.transpose();
    const Mat off = at * P2 * aug.Kbar;
    Mat g(d + nw, d + nw);
    g.set_block(0, 0, symmetrize(P2 * (alpha2 - 1.0) + at * P2 * aug.Acal));
    g.set_block(0, d, off);
    g.set_block(d, 0, off.transpose());
    g.set_block(d, d,
                symmetrize(kt * P2 * aug.Kbar) -
                    symmetrize(inverse(aug.Rcal)) * (alpha2 / static_cast<double>(nw)));
    return g;
}

// ============================================================================
// Synthesis
// ============================================================================

P1Gamma synthesize_p1_gamma(const AugmentedSystem& aug, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("synthesize_p1_gamma: scale must be positive");
    const Mat at = aug.Acal.transpose();
    P1Gamma out;
    out.P1 = symmetrize(solve_dlyap(at, Mat::identity(aug.dim())) * scale);
    const Mat w = inv_sqrtm_spd(out.P1);
    out.gamma = std::max(0.0, max_eigenvalue(symmetrize(w * at * out.P1 * aug.Acal * w)));
    // Shift by the residual eigenvalue deficit so the rounded certificate
    // still passes the eigenvalue test.
    const double deficit = min_eigenvalue(rate_block(aug, out.P1, out.gamma));
    if (deficit < 0.0) out.gamma += -deficit / min_eigenvalue(out.P1);
    if (!(out.gamma < 1.0)) throw InstabilityError("synthesize_p1_gamma: decay rate is not below 1");
    return out;
}

RateCertificate synthesize_gamma_a(const AugmentedSystem& aug, const P1Gamma& p1, const AttackBounds& bounds,
                                   const LmiOptions& opts) {
    const AttackTerms terms = attack_terms(aug, p1.P1, bounds);
    const Mat z = compression(terms, aug.Lbar);
    const Mat zt = z.transpose();
    const std::size_t d = terms.d;
    const std::vector<double> alphas = logspace(opts.alpha1_min, opts.alpha1_max, opts.alpha1_points);

    bool found = false;
    RateCertificate best;
    best.P1 = p1.P1;
    best.gamma = p1.gamma;
    double best_violation = -std::numeric_limits<double>::infinity();

    for (double a1 : alphas) {
        for (double ratio : opts.alpha3_ratios) {
            const double a3 = ratio * a1;
            const Mat base = zt * assemble(terms, 0.0, a1, a3) * z;
            auto block_at = [&](double ga) {
                Mat g = base;
                for (std::size_t i = 0; i < d; ++i)
                    for (std::size_t j = 0; j < d; ++j) g(i, j) += ga * terms.P1(i, j);
                return g;
            };
            auto feasible = [&](double ga) { return is_pd(block_at(ga)); };

            const double ceiling = found ? best.gamma_a : opts.gamma_a_cap;
            if (!feasible(ceiling)) {
                if (!found) best_violation = std::max(best_violation, min_eigenvalue(symmetrize(block_at(ceiling))));
                continue;
            }
            double lo = 0.0, hi = ceiling;
            if (feasible(0.0)) {
                hi = 0.0;
            } else {
                if (!found) {
                    hi = 1.0;
                    while (!feasible(hi)) {
                        lo = hi;
                        hi *= 2.0;
                    }
                }
                while (hi - lo > opts.bisection_tol * hi) {
                    const double mid = 0.5 * (lo + hi);
                    if (feasible(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            if (!found || hi < best.gamma_a) {
                found = true;
                best.gamma_a = hi;
                best.alpha1 = a1;
                best.alpha3 = a3;
            }
        }
    }
    if (!found) {
        throw InfeasibleError("synthesize_gamma_a: no multiplier on the grid certifies an attack growth rate up to " +
                              std::to_string(opts.gamma_a_cap) + " (best minimum eigenvalue " +
                              std::to_string(best_violation) + ")");
    }
    return best;
}

namespace {

bool invariance_feasible(const AugmentedSystem& aug, const Mat& P2, double alpha2) {
    return is_pd(-invariance_block(aug, P2, alpha2));
}

// Largest beta with beta * shape feasible for alpha2 (the feasible set of beta
// is an interval starting at 0); returns 0 when none is found.
double max_scale(const AugmentedSystem& aug, const Mat& shape, double alpha2, double tol) {
    auto feasible = [&](double beta) { return invariance_feasible(aug, shape * beta, alpha2); };
    double lo = 1.0, hi = 1.0;
    if (feasible(1.0)) {
        while (feasible(hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > 1e300) return 0.0;
        }
    } else {
        while (!feasible(lo)) {
            hi = lo;
            lo *= 0.5;
            if (lo < 1e-300) return 0.0;
        }
    }
    while (hi - lo > tol * lo) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

// Symmetric basis of S^d: E = e_i e_j^T + e_j e_i^T (i < j), e_i e_i^T.
std::vector<std::pair<std::size_t, std::size_t>> sym_index(std::size_t d) {
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) idx.emplace_back(i, j);
    return idx;
}

Mat sym_basis(std::size_t d, std::size_t i, std::size_t j) {
    Mat e(d, d);
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
}

double trace_product(const Mat& a, const Mat& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, i);
    return s;
}

// Maximizes log det P subject to invariance_block(P, alpha2) < 0 by following
// the central path of log det P + mu log det(-block) with damped Newton steps.
Mat maxdet_barrier(const AugmentedSystem& aug, double alpha2, Mat P, double mu_final) {
    const std::size_t d = aug.dim();
    const auto idx = sym_index(d);
    const std::size_t nv = idx.size();
    const Mat offset = invariance_block(aug, Mat(d, d), alpha2);
    std::vector<Mat> basis, lifted;
    basis.reserve(nv);
    lifted.reserve(nv);
    for (auto [i, j] : idx) {
        basis.push_back(sym_basis(d, i, j));
        lifted.push_back(invariance_block(aug, basis.back(), alpha2) - offset);
    }

    auto objective = [&](const Mat& x, double mu, double& value) {
        Mat lp, lg;
        if (!try_cholesky(x, lp)) return false;
        if (!try_cholesky(-invariance_block(aug, x, alpha2), lg)) return false;
        double a = 0.0, b = 0.0;
        for (std::size_t i = 0; i < lp.rows(); ++i) a += std::log(lp(i, i));
        for (std::size_t i = 0; i < lg.rows(); ++i) b += std::log(lg(i, i));
        value = 2.0 * a + 2.0 * mu * b;
        return true;
    };

    for (double mu = 1.0; mu >= mu_final * 0.999; mu *= 0.1) {
        for (int iter = 0; iter < 200; ++iter) {
            const Mat p_inv = inverse(P);
            const Mat g_inv = inverse(-invariance_block(aug, P, alpha2));
            std::vector<Mat> pe(nv), gf(nv);
            Mat grad(nv, 1);
            for (std::size_t k = 0; k < nv; ++k) {
                pe[k] = p_inv * basis[k];
                gf[k] = g_inv * lifted[k];
                double tp = 0.0, tg = 0.0;
                for (std::size_t i = 0; i < d; ++i) tp += pe[k](i, i);
                for (std::size_t i = 0; i < gf[k].rows(); ++i) tg += gf[k](i, i);
                grad[k] = tp - mu * tg;
            }
            Mat hess(nv, nv);
            for (std::size_t k = 0; k < nv; ++k) {
                for (std::size_t l = k; l < nv; ++l) {
                    const double h = trace_product(pe[k], pe[l]) + mu * trace_product(gf[k], gf[l]);
                    hess(k, l) = h;
                    hess(l, k) = h;
                }
            }
            const Mat step = solve(hess, grad);
            const double decrement = dot(grad, step);
            if (!(decrement > 1e-12)) break;

            double current = 0.0;
            objective(P, mu, current);
            Mat delta(d, d);
            for (std::size_t k = 0; k < nv; ++k) {
                const auto [i, j] = idx[k];
                delta(i, j) = step[k];
                delta(j, i) = step[k];
            }
            bool moved = false;
            for (double t = 1.0; t > 1e-10; t *= 0.5) {
                const Mat trial = P + delta * t;
                double value = 0.0;
                if (objective(trial, mu, value) && value >= current + 0.25 * t * decrement) {
                    P = trial;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
    }
    return P;
}

} // namespace

InvarianceCertificate synthesize_p2_scaling(const AugmentedSystem& aug, double p, const LmiOptions& opts) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("synthesize_p2: p must lie in (0, 1)");
    const Mat p_hat = symmetrize(solve_dlyap(aug.Acal.transpose(), Mat::identity(aug.dim())));
    const double limit = opts.alpha2_margin / max_eigenvalue(p_hat);

    bool found = false;
    InvarianceCertificate best;
    best.p = p;
    double best_beta = 0.0;
    for (double a2 : logspace(opts.alpha2_min, opts.alpha2_max, opts.alpha2_points)) {
        if (a2 > limit) continue;
        const double beta = max_scale(aug, p_hat, a2, opts.bisection_tol);
        if (beta > 0.0 && (!found || beta > best_beta)) {
            found = true;
            best_beta = beta;
            best.alpha2 = a2;
        }
    }
    if (!found) throw InfeasibleError("synthesize_p2: no alpha2 on the grid admits an invariance certificate");
    best.P2 = p_hat * best_beta;
    return best;
}

InvarianceCertificate synthesize_p2_maxdet(const AugmentedSystem& aug, double p, const LmiOptions& opts) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("synthesize_p2: p must lie in (0, 1)");
    const std::size_t d = aug.dim();
    bool found = false;
    InvarianceCertificate best;
    best.p = p;
    double best_logdet = 0.0;
    for (double a2 : logspace(opts.alpha2_min, opts.alpha2_max, opts.alpha2_points)) {
        // (1 - a2) X - Acal^T X Acal = (1 - a2) I makes the leading block negative.
        if (!(a2 < 1.0)) continue;
        Mat shape;
        try {
            shape = symmetrize(solve_dlyap(aug.Acal.transpose() * (1.0 / std::sqrt(1.0 - a2)), Mat::identity(d)));
        } catch (const InstabilityError&) {
            continue;
        }
        const double beta = max_scale(aug, shape, a2, 1e-3);
        if (!(beta > 0.0)) continue;
        const Mat P2 = maxdet_barrier(aug, a2, shape * (0.5 * beta), opts.barrier_mu_final);
        if (!invariance_feasible(aug, P2, a2)) continue;
        const double ld = logdet(P2);
        if (!found || ld > best_logdet) {
            found = true;
            best_logdet = ld;
            best.alpha2 = a2;
            best.P2 = P2;
        }
    }
    if (!found) throw InfeasibleError("synthesize_p2: no alpha2 on the grid admits an invariance certificate");
    return best;
}

InvarianceCertificate synthesize_p2(const AugmentedSystem& aug, double p, const LmiOptions& opts) {
    return opts.p2_method == P2Method::Scaling ? synthesize_p2_scaling(aug, p, opts)
                                               : synthesize_p2_maxdet(aug, p, opts);
}

// ============================================================================
// Verification
// ============================================================================

CertificateReport check_certificates(const AugmentedSystem& aug, const AttackBounds& bounds,
                                     const RateCertificate& rate, const InvarianceCertificate& inv) {
    CertificateReport r;
    r.rate_margin = min_eigenvalue(rate_block(aug, rate.P1, rate.gamma));
    r.attack_margin =
        min_eigenvalue(build_gamma_a_blocks(aug, rate.P1, bounds, rate.gamma_a, rate.alpha1, rate.alpha3));
    r.invariance_margin = -max_eigenvalue(invariance_block(aug, inv.P2, inv.alpha2));
    r.p1_min_eig = min_eigenvalue(symmetrize(rate.P1));
    r.p2_min_eig = min_eigenvalue(symmetrize(inv.P2));
    r.scalars_ok = rate.gamma >= 0.0 && rate.gamma < 1.0 && rate.gamma_a >= 0.0 && rate.alpha1 >= 0.0 &&
                   rate.alpha3 >= 0.0 && inv.alpha2 >= 0.0 && inv.p > 0.0 && inv.p < 1.0;
    const double tol = -CertificateReport::kTolerance;
    r.accepted = r.scalars_ok && r.rate_margin >= tol && r.attack_margin >= tol && r.invariance_margin >= tol &&
                 r.p1_min_eig > 0.0 && r.p2_min_eig > 0.0 && asymmetry(rate.P1) <= 1e-12 &&
                 asymmetry(inv.P2) <= 1e-12;
    return r;
}

} // namespace cpsguard
