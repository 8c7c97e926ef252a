#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "cpsguard/errors.hpp"

namespace cpsguard {

// ============================================================================
// Dense row-major matrix
// ============================================================================
// Column vectors are represented as n x 1 matrices. Sizes in this project are
// small (at most a few dozen rows), so everything is stored by value.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols);  // zero-filled
    // Throws DimensionError on size mismatch, InvalidInputError on NaN/Inf.
    Mat(std::size_t rows, std::size_t cols, std::vector<double> row_major);
    Mat(std::initializer_list<std::initializer_list<double>> rows);

    static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols); }
    static Mat identity(std::size_t n);
    static Mat diag(std::span<const double> d);
    static Mat diag(std::initializer_list<double> d);
    static Mat column(std::span<const double> v);
    static Mat column(std::initializer_list<double> v);
    static Mat unit(std::size_t n, std::size_t i);  // e_i as a column

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    bool is_square() const { return rows_ == cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    // Linear access, mainly for column vectors.
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<const double> data() const { return data_; }

    Mat transpose() const;
    Mat block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    void set_block(std::size_t r0, std::size_t c0, const Mat& b);

    double frobenius_norm() const;
    double max_abs() const;
    bool all_finite() const;

    Mat& operator+=(const Mat& o);
    Mat& operator-=(const Mat& o);
    Mat& operator*=(double s);

    friend bool operator==(const Mat& a, const Mat& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(Mat a, const Mat& b);
Mat operator-(Mat a);
Mat operator*(const Mat& a, const Mat& b);
Mat operator*(Mat a, double s);
Mat operator*(double s, Mat a);

// Stacking helpers. All blocks in a row must share a row count, etc.
Mat hstack(std::initializer_list<Mat> blocks);
Mat vstack(std::initializer_list<Mat> blocks);
Mat block_diag(std::initializer_list<Mat> blocks);

double dot(const Mat& a, const Mat& b);        // sum of elementwise products
double quad_form(const Mat& x, const Mat& M);  // x^T M x for a column x
Mat symmetrize(const Mat& m);                  // (M + M^T) / 2
double asymmetry(const Mat& m);                // ||M - M^T||_F / max(1, ||M||_F)

// ============================================================================
// Factorizations and solves
// ============================================================================

// Lower-triangular L with M = L L^T. Throws DomainError when M is not
// positive definite; try_cholesky reports the same condition as false.
Mat cholesky(const Mat& m);
bool try_cholesky(const Mat& m, Mat& lower);

// Solves M X = B. Uses Cholesky when M is SPD, partial-pivot LU otherwise.
// Throws DomainError when M is singular.
Mat solve(const Mat& m, const Mat& rhs);
Mat inverse(const Mat& m);

// ============================================================================
// Symmetric eigenproblem (cyclic Jacobi)
// ============================================================================
struct SymEigDecomp {
    std::vector<double> eigenvalues;  // ascending
    Mat eigenvectors;                 // orthonormal columns, matching order
};

// Input is symmetrized first. Throws DimensionError for non-square input.
SymEigDecomp sym_eig(const Mat& m);
// Eigenvalues only (ascending); skips the rotation accumulation.
std::vector<double> sym_eigvals(const Mat& m);
double min_eigenvalue(const Mat& m);
double max_eigenvalue(const Mat& m);

// True iff min eigenvalue >= -tol * max(1, ||M||_F).
bool is_psd(const Mat& m, double tol);

// Symmetric square root and inverse square root of an SPD matrix.
Mat sqrtm_spd(const Mat& m);
Mat inv_sqrtm_spd(const Mat& m);

// Sum of log eigenvalues. Throws DomainError unless M is positive definite.
double logdet(const Mat& m);

// Upper estimate of the spectral radius from ||A^(2^j)||^(1/2^j).
double spectral_radius_estimate(const Mat& a);

// ============================================================================
// Lyapunov / Riccati
// ============================================================================

// X = A X A^T + Q by squared-Smith doubling. Throws InstabilityError when the
// spectral radius estimate of A is >= 1 - 1e-8.
Mat solve_dlyap(const Mat& a, const Mat& q);

struct RiccatiOptions {
    double tolerance = 1e-11;  // Frobenius norm of successive-iterate difference
    std::size_t max_iterations = 1'000'000;
};

// Control Riccati: S = A^T S A + W - A^T S B (B^T S B + V)^-1 B^T S A.
Mat solve_dare(const Mat& a, const Mat& b, const Mat& w, const Mat& v,
               const RiccatiOptions& opts = {});
// Filter Riccati: P = A P A^T - A P C^T (C P C^T + R)^-1 C P A^T + Q.
Mat solve_filter_dare(const Mat& a, const Mat& c, const Mat& q, const Mat& r,
                      const RiccatiOptions& opts = {});

// One step of the respective recursions; exposed for stationarity checks.
Mat dare_step(const Mat& s, const Mat& a, const Mat& b, const Mat& w, const Mat& v);
Mat filter_dare_step(const Mat& p, const Mat& a, const Mat& c, const Mat& q, const Mat& r);

// Matrix exponential by scaling and squaring of the truncated Taylor series.
Mat expm(const Mat& a);

} // namespace cpsguard
