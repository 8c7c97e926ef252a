#include "cpsguard/plant.hpp"

#include <cmath>
#include <string>

#include "cpsguard/rng.hpp"

namespace cpsguard {

void PlantModel::validate() const {
    const std::size_t nx = A.rows();
    if (!A.is_square() || nx == 0) throw DimensionError("PlantModel: A must be square and nonempty");
    if (B.rows() != nx || B.cols() == 0) throw DimensionError("PlantModel: B must be n x l");
    if (C.cols() != nx || C.rows() == 0) throw DimensionError("PlantModel: C must be m x n");
    if (Q.rows() != nx || !Q.is_square()) throw DimensionError("PlantModel: Q must be n x n");
    if (R.rows() != C.rows() || !R.is_square()) throw DimensionError("PlantModel: R must be m x m");
    if (U.rows() != B.cols() || !U.is_square()) throw DimensionError("PlantModel: U must be l x l");
    if (asymmetry(Q) > 1e-10 || !is_psd(Q, 1e-12)) throw DomainError("PlantModel: Q must be symmetric PSD");
    if (asymmetry(R) > 1e-10 || min_eigenvalue(R) <= 0.0) throw DomainError("PlantModel: R must be symmetric PD");
    if (asymmetry(U) > 1e-10 || min_eigenvalue(U) <= 0.0) throw DomainError("PlantModel: U must be symmetric PD");
    if (!(sample_period > 0.0)) throw DomainError("PlantModel: sample period must be positive");
}

LqgDesign synthesize_lqg(const PlantModel& model, const Mat& W, const Mat& V) {
    model.validate();
    if (W.rows() != model.n() || !W.is_square()) throw DimensionError("synthesize_lqg: W must be n x n");
    if (V.rows() != model.l() || !V.is_square()) throw DimensionError("synthesize_lqg: V must be l x l");
    if (min_eigenvalue(W) <= 0.0 || min_eigenvalue(V) <= 0.0) {
        throw DomainError("synthesize_lqg: W and V must be positive definite");
    }

    LqgDesign d;
    d.W = W;
    d.V = V;
    d.P = solve_filter_dare(model.A, model.C, model.Q, model.R);
    d.Sigma = symmetrize(model.C * d.P * model.C.transpose() + model.R);
    // K = P C^T Sigma^-1, computed as (Sigma^-1 C P)^T since both are symmetric.
    d.K = solve(d.Sigma, model.C * d.P).transpose();
    d.S = solve_dare(model.A, model.B, W, V);
    const Mat bt = model.B.transpose();
    d.L = -solve(bt * d.S * model.B + V, bt * d.S * model.A);

    const Mat in = Mat::identity(model.n());
    const double rho_ctrl = spectral_radius_estimate(model.A + model.B * d.L);
    const double rho_est = spectral_radius_estimate(model.A * (in - d.K * model.C));
    if (rho_ctrl >= 1.0 || rho_est >= 1.0) {
        throw InstabilityError("synthesize_lqg: closed loop not stable (controller " +
                               std::to_string(rho_ctrl) + ", estimator " + std::to_string(rho_est) + ")");
    }
    return d;
}

AugmentedSystem build_augmented(const PlantModel& model, const LqgDesign& design) {
    const std::size_t n = model.n(), m = model.m(), l = model.l();
    if (design.K.rows() != n || design.K.cols() != m || design.L.rows() != l || design.L.cols() != n ||
        design.Sigma.rows() != m) {
        throw DimensionError("build_augmented: design does not match model dimensions");
    }
    AugmentedSystem aug;
    const Mat bl = model.B * design.L;
    aug.Acal = Mat(2 * n, 2 * n);
    aug.Acal.set_block(0, 0, model.A + bl);
    aug.Acal.set_block(0, n, -bl);
    aug.Acal.set_block(n, n, model.A);
    aug.Ical = vstack({Mat::identity(n), Mat::identity(n)});
    aug.Kcal = vstack({Mat(n, m), -design.K});
    aug.Bcal = vstack({model.B, model.B});
    aug.Kbar = hstack({aug.Ical, aug.Kcal});
    aug.Rcal = block_diag({model.Q, design.Sigma});
    aug.Lbar = hstack({design.L, -design.L});
    return aug;
}

// ============================================================================
// Residue bias
// ============================================================================

ResidueBiasTracker::ResidueBiasTracker(const PlantModel& model, const LqgDesign& design)
    : prop_(model.A * (Mat::identity(model.n()) - design.K * model.C)),
      B_(model.B),
      AK_(model.A * design.K),
      C_(model.C),
      xi_(model.n(), 1) {}

Mat ResidueBiasTracker::bias(const Mat& ya) const { return ya + C_ * xi_; }

void ResidueBiasTracker::advance(const Mat& ua, const Mat& ya) {
    xi_ = prop_ * xi_ + B_ * ua - AK_ * ya;
}

Mat residue_bias(const PlantModel& model, const LqgDesign& design, const std::vector<Mat>& ua_hist,
                 const std::vector<Mat>& ya_hist, std::size_t k) {
    if (ua_hist.size() < k || ya_hist.size() < k + 1) {
        throw DimensionError("residue_bias: history shorter than requested step");
    }
    ResidueBiasTracker tracker(model, design);
    for (std::size_t j = 0; j < k; ++j) tracker.advance(ua_hist[j], ya_hist[j]);
    return tracker.bias(ya_hist[k]);
}

// ============================================================================
// Quadruple tank
// ============================================================================

ContinuousModel tank_continuous_model(const TankParameters& p) {
    double t[4];
    for (int i = 0; i < 4; ++i) {
        if (!(p.area[i] > 0.0 && p.outlet[i] > 0.0 && p.level0[i] > 0.0)) {
            throw DomainError("tank_continuous_model: areas and levels must be positive");
        }
        t[i] = p.area[i] / p.outlet[i] * std::sqrt(2.0 * p.level0[i] / p.gravity);
    }
    const double* a = p.area;
    const double* k = p.pump_gain;
    const double* g = p.valve_split;

    ContinuousModel cm;
    cm.A = Mat{{-1.0 / t[0], 0.0, a[2] / (a[0] * t[2]), 0.0},
               {0.0, -1.0 / t[1], 0.0, a[3] / (a[1] * t[3])},
               {0.0, 0.0, -1.0 / t[2], 0.0},
               {0.0, 0.0, 0.0, -1.0 / t[3]}};
    cm.B = Mat{{g[0] * k[0] / a[0], 0.0},
               {0.0, g[1] * k[1] / a[1]},
               {0.0, (1.0 - g[1]) * k[1] / a[2]},
               {(1.0 - g[0]) * k[0] / a[3], 0.0}};
    cm.C = Mat{{p.sensor_gain, 0.0, 0.0, 0.0}, {0.0, p.sensor_gain, 0.0, 0.0}};
    return cm;
}

std::pair<Mat, Mat> discretize_zoh(const Mat& a, const Mat& b, double period) {
    const std::size_t n = a.rows(), l = b.cols();
    Mat aug(n + l, n + l);
    aug.set_block(0, 0, a * period);
    aug.set_block(0, n, b * period);
    const Mat e = expm(aug);
    return {e.block(0, 0, n, n), e.block(0, n, n, l)};
}

namespace {

Mat scaled_gram(RngStream& rng, std::size_t dim) {
    Mat m(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) m(i, j) = rng.uniform();
    return symmetrize(m * m.transpose() * (1.0 / 100.0));
}

} // namespace

PlantSetup quadruple_tank(std::uint64_t seed, const TankParameters& params) {
    const ContinuousModel cm = tank_continuous_model(params);
    auto [ad, bd] = discretize_zoh(cm.A, cm.B, params.sample_period);

    RngStream rng(seed);
    PlantSetup setup;
    setup.model.A = std::move(ad);
    setup.model.B = std::move(bd);
    setup.model.C = cm.C;
    setup.model.Q = scaled_gram(rng, 4);
    setup.model.R = scaled_gram(rng, 2);
    const double u1 = 1.0 / params.voltage0[0], u2 = 1.0 / params.voltage0[1];
    setup.model.U = Mat::diag({u1 * u1, u2 * u2});
    setup.model.sample_period = params.sample_period;
    setup.W = Mat::identity(4);
    setup.V = Mat::identity(2) * 100.0;
    setup.model.validate();
    return setup;
}

} // namespace cpsguard
