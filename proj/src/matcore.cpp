#include "cpsguard/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cpsguard {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(std::string(what) + ": shape mismatch (" +
                             std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                             std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    }
}

void require_square(const Mat& m, const char* what) {
    if (!m.is_square()) {
        throw DimensionError(std::string(what) + ": matrix must be square");
    }
}

void require_finite(const Mat& m, const char* what) {
    if (!m.all_finite()) {
        throw InvalidInputError(std::string(what) + ": non-finite entry");
    }
}

} // namespace

// ============================================================================
// Mat
// ============================================================================

Mat::Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("Mat: expected " + std::to_string(rows * cols) + " entries, got " +
                             std::to_string(data_.size()));
    }
    require_finite(*this, "Mat");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw DimensionError("Mat: ragged initializer");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
    require_finite(*this, "Mat");
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(std::span<const double> d) {
    Mat m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    require_finite(m, "Mat::diag");
    return m;
}

Mat Mat::diag(std::initializer_list<double> d) {
    return diag(std::span<const double>(d.begin(), d.size()));
}

Mat Mat::column(std::span<const double> v) {
    return Mat(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Mat Mat::column(std::initializer_list<double> v) {
    return column(std::span<const double>(v.begin(), v.size()));
}

Mat Mat::unit(std::size_t n, std::size_t i) {
    Mat e(n, 1);
    e[i] = 1.0;
    return e;
}

Mat Mat::transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Mat Mat::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) {
        throw DimensionError("Mat::block: out of range");
    }
    Mat b(nr, nc);
    for (std::size_t r = 0; r < nr; ++r)
        for (std::size_t c = 0; c < nc; ++c) b(r, c) = (*this)(r0 + r, c0 + c);
    return b;
}

void Mat::set_block(std::size_t r0, std::size_t c0, const Mat& b) {
    if (r0 + b.rows() > rows_ || c0 + b.cols() > cols_) {
        throw DimensionError("Mat::set_block: out of range");
    }
    for (std::size_t r = 0; r < b.rows(); ++r)
        for (std::size_t c = 0; c < b.cols(); ++c) (*this)(r0 + r, c0 + c) = b(r, c);
}

double Mat::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Mat::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Mat::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat& Mat::operator+=(const Mat& o) {
    require_same_shape(*this, o, "operator+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& o) {
    require_same_shape(*this, o, "operator-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Mat operator+(Mat a, const Mat& b) { return a += b; }
Mat operator-(Mat a, const Mat& b) { return a -= b; }
Mat operator-(Mat a) { return a *= -1.0; }
Mat operator*(Mat a, double s) { return a *= s; }
Mat operator*(double s, Mat a) { return a *= s; }

Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("operator*: inner dimensions " + std::to_string(a.cols()) + " and " +
                             std::to_string(b.rows()) + " differ");
    }
    Mat c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

Mat hstack(std::initializer_list<Mat> blocks) {
    std::size_t rows = blocks.size() ? blocks.begin()->rows() : 0;
    std::size_t cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != rows) throw DimensionError("hstack: row count mismatch");
        cols += b.cols();
    }
    Mat out(rows, cols);
    std::size_t c0 = 0;
    for (const auto& b : blocks) {
        out.set_block(0, c0, b);
        c0 += b.cols();
    }
    return out;
}

Mat vstack(std::initializer_list<Mat> blocks) {
    std::size_t cols = blocks.size() ? blocks.begin()->cols() : 0;
    std::size_t rows = 0;
    for (const auto& b : blocks) {
        if (b.cols() != cols) throw DimensionError("vstack: column count mismatch");
        rows += b.rows();
    }
    Mat out(rows, cols);
    std::size_t r0 = 0;
    for (const auto& b : blocks) {
        out.set_block(r0, 0, b);
        r0 += b.rows();
    }
    return out;
}

Mat block_diag(std::initializer_list<Mat> blocks) {
    std::size_t rows = 0, cols = 0;
    for (const auto& b : blocks) {
        rows += b.rows();
        cols += b.cols();
    }
    Mat out(rows, cols);
    std::size_t r0 = 0, c0 = 0;
    for (const auto& b : blocks) {
        out.set_block(r0, c0, b);
        r0 += b.rows();
        c0 += b.cols();
    }
    return out;
}

double dot(const Mat& a, const Mat& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double quad_form(const Mat& x, const Mat& m) {
    if (x.cols() != 1 || m.rows() != x.rows() || m.cols() != x.rows()) {
        throw DimensionError("quad_form: shape mismatch");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) row += m(i, j) * x[j];
        s += x[i] * row;
    }
    return s;
}

Mat symmetrize(const Mat& m) {
    require_square(m, "symmetrize");
    Mat s(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) s(i, j) = 0.5 * (m(i, j) + m(j, i));
    return s;
}

double asymmetry(const Mat& m) {
    require_square(m, "asymmetry");
    return (m - m.transpose()).frobenius_norm() / std::max(1.0, m.frobenius_norm());
}

// ============================================================================
// Factorizations
// ============================================================================

bool try_cholesky(const Mat& m, Mat& lower) {
    require_square(m, "cholesky");
    const std::size_t n = m.rows();
    lower = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= lower(j, k) * lower(j, k);
        if (!(d > 0.0)) return false;
        const double ljj = std::sqrt(d);
        lower(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
            lower(i, j) = s / ljj;
        }
    }
    return true;
}

Mat cholesky(const Mat& m) {
    Mat l;
    if (!try_cholesky(m, l)) throw DomainError("cholesky: matrix is not positive definite");
    return l;
}

namespace {

Mat cholesky_solve(const Mat& l, const Mat& rhs) {
    const std::size_t n = l.rows();
    Mat x = rhs;
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

Mat lu_solve(Mat a, Mat b) {
    const std::size_t n = a.rows();
    const double scale = std::max(a.max_abs(), 1e-300);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) <= 1e-14 * scale) {
            throw DomainError("solve: matrix is singular to working precision");
        }
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
            for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(piv, c));
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
            for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) -= f * b(col, c);
        }
    }
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = n; i-- > 0;) {
            double s = b(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= a(i, k) * b(k, c);
            b(i, c) = s / a(i, i);
        }
    }
    return b;
}

} // namespace

Mat solve(const Mat& m, const Mat& rhs) {
    require_square(m, "solve");
    if (rhs.rows() != m.rows()) throw DimensionError("solve: right-hand side row mismatch");
    if (asymmetry(m) < 1e-12) {
        Mat l;
        if (try_cholesky(m, l)) return cholesky_solve(l, rhs);
    }
    return lu_solve(m, rhs);
}

Mat inverse(const Mat& m) {
    require_square(m, "inverse");
    return solve(m, Mat::identity(m.rows()));
}

// ============================================================================
// Jacobi eigensolver
// ============================================================================

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kJacobiTol = 1e-12;

double off_diagonal_norm(const Mat& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

// Diagonalizes a in place; accumulates rotations into v when non-null.
void jacobi(Mat& a, Mat* v) {
    const std::size_t n = a.rows();
    const double norm = a.frobenius_norm();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        if (off_diagonal_norm(a) <= kJacobiTol * norm) return;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                if (v) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = (*v)(k, p), vkq = (*v)(k, q);
                        (*v)(k, p) = c * vkp - s * vkq;
                        (*v)(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
}

Mat prepare_symmetric(const Mat& m, const char* what) {
    require_square(m, what);
    require_finite(m, what);
    return symmetrize(m);
}

} // namespace

SymEigDecomp sym_eig(const Mat& m) {
    Mat a = prepare_symmetric(m, "sym_eig");
    const std::size_t n = a.rows();
    Mat v = Mat::identity(n);
    jacobi(a, &v);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

    SymEigDecomp out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Mat(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        out.eigenvalues[c] = a(order[c], order[c]);
        for (std::size_t r = 0; r < n; ++r) out.eigenvectors(r, c) = v(r, order[c]);
    }
    return out;
}

std::vector<double> sym_eigvals(const Mat& m) {
    Mat a = prepare_symmetric(m, "sym_eigvals");
    jacobi(a, nullptr);
    std::vector<double> ev(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

double min_eigenvalue(const Mat& m) {
    const auto ev = sym_eigvals(m);
    return ev.empty() ? 0.0 : ev.front();
}

double max_eigenvalue(const Mat& m) {
    const auto ev = sym_eigvals(m);
    return ev.empty() ? 0.0 : ev.back();
}

bool is_psd(const Mat& m, double tol) {
    return min_eigenvalue(m) >= -tol * std::max(1.0, m.frobenius_norm());
}

namespace {

Mat spectral_function(const Mat& m, double (*f)(double), const char* what) {
    const auto eig = sym_eig(m);
    if (eig.eigenvalues.empty()) return Mat();
    if (!(eig.eigenvalues.front() > 0.0)) {
        throw DomainError(std::string(what) + ": matrix is not positive definite");
    }
    const std::size_t n = m.rows();
    Mat out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double fk = f(eig.eigenvalues[k]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += fk * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
    }
    return symmetrize(out);
}

} // namespace

Mat sqrtm_spd(const Mat& m) {
    return spectral_function(m, [](double x) { return std::sqrt(x); }, "sqrtm_spd");
}

Mat inv_sqrtm_spd(const Mat& m) {
    return spectral_function(m, [](double x) { return 1.0 / std::sqrt(x); }, "inv_sqrtm_spd");
}

double logdet(const Mat& m) {
    const auto ev = sym_eigvals(m);
    double s = 0.0;
    for (double l : ev) {
        if (!(l > 0.0)) throw DomainError("logdet: matrix is not positive definite");
        s += std::log(l);
    }
    return s;
}

double spectral_radius_estimate(const Mat& a) {
    require_square(a, "spectral_radius_estimate");
    require_finite(a, "spectral_radius_estimate");
    Mat b = a;
    // a^(2^j) == b * exp(log_scale) with ||b||_F == 1 after normalization.
    double log_scale = 0.0;
    double estimate = 0.0;
    for (int j = 0; j <= 30; ++j) {
        const double nrm = b.frobenius_norm();
        if (nrm == 0.0) return 0.0;
        b *= 1.0 / nrm;
        log_scale += std::log(nrm);
        estimate = std::exp(std::ldexp(log_scale, -j));
        b = b * b;
        log_scale *= 2.0;
    }
    return estimate;
}

// ============================================================================
// Lyapunov and Riccati
// ============================================================================

Mat solve_dlyap(const Mat& a, const Mat& q) {
    require_square(a, "solve_dlyap");
    require_same_shape(a, q, "solve_dlyap");
    const double rho = spectral_radius_estimate(a);
    if (rho >= 1.0 - 1e-8) {
        throw InstabilityError("solve_dlyap: spectral radius estimate " + std::to_string(rho) +
                               " is not below 1");
    }
    Mat x = symmetrize(q);
    Mat ak = a;
    for (int it = 0; it < 200; ++it) {
        const Mat update = ak * x * ak.transpose();
        x += update;
        ak = ak * ak;
        if (update.frobenius_norm() <= 1e-12 * x.frobenius_norm()) break;
    }
    return symmetrize(x);
}

Mat dare_step(const Mat& s, const Mat& a, const Mat& b, const Mat& w, const Mat& v) {
    const Mat at = a.transpose();
    const Mat bt = b.transpose();
    const Mat sb = s * b;
    const Mat gain = solve(bt * sb + v, bt * s * a);  // (B^T S B + V)^-1 B^T S A
    return symmetrize(at * s * a + w - at * sb * gain);
}

Mat filter_dare_step(const Mat& p, const Mat& a, const Mat& c, const Mat& q, const Mat& r) {
    return dare_step(p, a.transpose(), c.transpose(), q, r);
}

Mat solve_dare(const Mat& a, const Mat& b, const Mat& w, const Mat& v, const RiccatiOptions& opts) {
    require_square(a, "solve_dare");
    if (b.rows() != a.rows() || w.rows() != a.rows() || !w.is_square() || !v.is_square() ||
        v.rows() != b.cols()) {
        throw DimensionError("solve_dare: inconsistent dimensions");
    }
    Mat s = symmetrize(w);
    for (std::size_t it = 0; it < opts.max_iterations; ++it) {
        Mat next = dare_step(s, a, b, w, v);
        if (!next.all_finite()) throw ConvergenceError("solve_dare: iterate diverged");
        const double diff = (next - s).frobenius_norm();
        s = std::move(next);
        if (diff < opts.tolerance) return s;
    }
    throw ConvergenceError("solve_dare: no convergence within iteration cap");
}

Mat solve_filter_dare(const Mat& a, const Mat& c, const Mat& q, const Mat& r,
                      const RiccatiOptions& opts) {
    return solve_dare(a.transpose(), c.transpose(), q, r, opts);
}

Mat expm(const Mat& a) {
    require_square(a, "expm");
    const std::size_t n = a.rows();
    const double nrm = a.frobenius_norm();
    int squarings = 0;
    if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    const Mat scaled = a * std::ldexp(1.0, -squarings);

    Mat sum = Mat::identity(n);
    Mat term = Mat::identity(n);
    for (int k = 1; k < 100; ++k) {
        term = term * scaled * (1.0 / k);
        sum += term;
        if (term.frobenius_norm() < 1e-16) break;
    }
    for (int i = 0; i < squarings; ++i) sum = sum * sum;
    return sum;
}

} // namespace cpsguard
