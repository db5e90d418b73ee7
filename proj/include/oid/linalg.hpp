#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "oid/errors.hpp"

namespace oid {

/// Dense row-major matrix of doubles. Small and value-semantic; every
/// kernel below is a pure function of its inputs.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    /// Assemble a d x n matrix whose columns are the given vectors.
    static DenseMatrix from_columns(const std::vector<std::vector<double>>& cols);

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    /// Append a column (matrix must be empty or have matching row count).
    void push_column(std::span<const double> col);

    DenseMatrix transposed() const;
    DenseMatrix operator*(const DenseMatrix& rhs) const;

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
        return t;
    }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Maintained inverse of a regularized Gram matrix
/// M = gamma*I + sum_j w_j v_j v_j^T.
struct GramInverse {
    std::size_t dim = 0;
    DenseMatrix inverse;         // dim x dim, symmetric positive definite
    double regularizer_gamma = 0.0;

    double trace() const { return inverse.trace(); }
};

/// Relative asymmetry max|a_ij - a_ji| / max(1, max|a_ij|).
double asymmetry(const DenseMatrix& m);

bool is_symmetric(const DenseMatrix& m, double tol = 1e-9);

/// Lower Cholesky factor of an SPD matrix. Throws SingularMatrixError when a
/// pivot falls below 1e-12 times the largest diagonal entry.
DenseMatrix cholesky_factor(const DenseMatrix& m);

/// Solve M x = b for SPD M via Cholesky.
std::vector<double> cholesky_solve(const DenseMatrix& m, std::span<const double> b);

/// Full inverse of an SPD matrix via its Cholesky factor.
DenseMatrix spd_inverse(const DenseMatrix& m);

/// tr(M^{-1}) for symmetric positive definite M.
double trace_of_inverse(const DenseMatrix& m);

/// tr((gamma*I + sum_j sigma_j^{-2} v_j v_j^T)^{-1}) over the columns v_j of
/// v_b. With gamma = 0 this is the unregularized profile-error objective.
double objective_f(const DenseMatrix& v_b, std::span<const double> c_b_diag, double gamma);

/// Assemble gamma*I + sum_j w_j v_j v_j^T from columns and per-column weights.
DenseMatrix weighted_gram(const DenseMatrix& v_b, std::span<const double> weights, double gamma);

/// Build a GramInverse directly from columns (weights are sigma^{-2}).
GramInverse gram_inverse_from_columns(const DenseMatrix& v_b, std::span<const double> weights, double gamma);

/// Sherman-Morrison update: the inverse of (M + weight * v v^T). A negative
/// weight is a downdate and must keep the matrix positive definite.
/// Throws DegenerateUpdateError when |1 + weight * v^T M^{-1} v| < 1e-12 or
/// when a downdate would cross zero.
GramInverse rank_one_update(const GramInverse& g, std::span<const double> v, double weight);

/// All eigenvalues of a symmetric matrix, descending, via cyclic Jacobi.
/// Throws NotSymmetricError when asymmetry exceeds 1e-9.
std::vector<double> symmetric_eigenvalues(const DenseMatrix& m);

// small vector helpers used across modules
double dot(std::span<const double> a, std::span<const double> b);
std::vector<double> mat_vec(const DenseMatrix& m, std::span<const double> v);

}  // namespace oid
