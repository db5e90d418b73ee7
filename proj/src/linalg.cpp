#include "oid/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>

namespace oid {

namespace {
constexpr double kPivotRelTol = 1e-12;
constexpr double kUpdateTol = 1e-12;
}  // namespace

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw InvalidArgumentError("from_rows: ragged rows");
        std::size_t j = 0;
        for (double v : row) m(i, j++) = v;
        ++i;
    }
    return m;
}

DenseMatrix DenseMatrix::from_columns(const std::vector<std::vector<double>>& cols) {
    if (cols.empty()) return {};
    const std::size_t d = cols.front().size();
    DenseMatrix m(d, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].size() != d) throw InvalidArgumentError("from_columns: ragged columns");
        for (std::size_t i = 0; i < d; ++i) m(i, j) = cols[j][i];
    }
    return m;
}

void DenseMatrix::push_column(std::span<const double> col) {
    if (empty()) {
        rows_ = col.size();
        cols_ = 1;
        data_.assign(col.begin(), col.end());
        return;
    }
    if (col.size() != rows_) throw InvalidArgumentError("push_column: row count mismatch");
    DenseMatrix wider(rows_, cols_ + 1);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) wider(i, j) = (*this)(i, j);
        wider(i, cols_) = col[i];
    }
    *this = std::move(wider);
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

DenseMatrix DenseMatrix::operator*(const DenseMatrix& rhs) const {
    if (cols_ != rhs.rows_) throw InvalidArgumentError("matmul: shape mismatch");
    DenseMatrix out(rows_, rhs.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < cols_; ++k) {
            const double a = (*this)(i, k);
            if (a == 0.0) continue;
            for (std::size_t j = 0; j < rhs.cols_; ++j) out(i, j) += a * rhs(k, j);
        }
    }
    return out;
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double asymmetry(const DenseMatrix& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    double max_abs = 1.0;
    for (double v : m.data()) max_abs = std::max(max_abs, std::abs(v));
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = i + 1; j < m.cols(); ++j)
            worst = std::max(worst, std::abs(m(i, j) - m(j, i)));
    return worst / max_abs;
}

bool is_symmetric(const DenseMatrix& m, double tol) {
    return m.rows() == m.cols() && asymmetry(m) <= tol;
}

DenseMatrix cholesky_factor(const DenseMatrix& m) {
    if (m.rows() != m.cols()) throw InvalidArgumentError("cholesky: matrix not square");
    const std::size_t n = m.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(m(i, i)));
    const double pivot_floor = kPivotRelTol * std::max(max_diag, 1e-300);

    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > pivot_floor)) throw SingularMatrixError("cholesky: pivot below tolerance (matrix singular or indefinite)");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

namespace {

// forward substitution L y = b, then back substitution L^T x = y
std::vector<double> cholesky_solve_factored(const DenseMatrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * y[k];
        y[ii] = s / l(ii, ii);
    }
    return y;
}

}  // namespace

std::vector<double> cholesky_solve(const DenseMatrix& m, std::span<const double> b) {
    if (b.size() != m.rows()) throw InvalidArgumentError("cholesky_solve: rhs size mismatch");
    return cholesky_solve_factored(cholesky_factor(m), b);
}

DenseMatrix spd_inverse(const DenseMatrix& m) {
    const DenseMatrix l = cholesky_factor(m);
    const std::size_t n = m.rows();
    DenseMatrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        const std::vector<double> col = cholesky_solve_factored(l, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
        e[j] = 0.0;
    }
    // symmetrize to scrub roundoff drift between the two triangles
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = v;
            inv(j, i) = v;
        }
    return inv;
}

double trace_of_inverse(const DenseMatrix& m) {
    if (!is_symmetric(m)) throw NotSymmetricError("trace_of_inverse: input not symmetric");
    // tr(M^{-1}) = ||L^{-1}||_F^2 for M = L L^T
    const DenseMatrix l = cholesky_factor(m);
    const std::size_t n = m.rows();
    double t = 0.0;
    std::vector<double> col(n);
    for (std::size_t j = 0; j < n; ++j) {
        // forward-substitute L col = e_j; only rows >= j are nonzero
        for (std::size_t i = j; i < n; ++i) {
            double s = (i == j) ? 1.0 : 0.0;
            for (std::size_t k = j; k < i; ++k) s -= l(i, k) * col[k];
            col[i] = s / l(i, i);
            t += col[i] * col[i];
        }
    }
    return t;
}

DenseMatrix weighted_gram(const DenseMatrix& v_b, std::span<const double> weights, double gamma) {
    const std::size_t d = v_b.rows();
    const std::size_t n = v_b.cols();
    if (weights.size() != n) throw InvalidArgumentError("weighted_gram: weight count mismatch");
    DenseMatrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = gamma;
    for (std::size_t c = 0; c < n; ++c) {
        const double w = weights[c];
        for (std::size_t i = 0; i < d; ++i) {
            const double wi = w * v_b(i, c);
            if (wi == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) m(i, j) += wi * v_b(j, c);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < i; ++j) m(i, j) = m(j, i);
    return m;
}

double objective_f(const DenseMatrix& v_b, std::span<const double> c_b_diag, double gamma) {
    if (v_b.cols() == 0) throw InvalidArgumentError("objective_f: empty selection");
    if (gamma < 0.0) throw InvalidArgumentError("objective_f: negative gamma");
    std::vector<double> weights(c_b_diag.size());
    for (std::size_t j = 0; j < c_b_diag.size(); ++j) {
        if (!(c_b_diag[j] > 0.0)) throw InvalidArgumentError("objective_f: sigma must be positive");
        weights[j] = 1.0 / (c_b_diag[j] * c_b_diag[j]);
    }
    return trace_of_inverse(weighted_gram(v_b, weights, gamma));
}

GramInverse gram_inverse_from_columns(const DenseMatrix& v_b, std::span<const double> weights, double gamma) {
    GramInverse g;
    g.dim = v_b.rows();
    g.regularizer_gamma = gamma;
    g.inverse = spd_inverse(weighted_gram(v_b, weights, gamma));
    return g;
}

GramInverse rank_one_update(const GramInverse& g, std::span<const double> v, double weight) {
    if (weight == 0.0) throw InvalidArgumentError("rank_one_update: zero weight");
    if (v.size() != g.dim) throw InvalidArgumentError("rank_one_update: vector dimension mismatch");
    const std::vector<double> iv = mat_vec(g.inverse, v);
    const double quad = dot(v, iv);
    const double denom = 1.0 + weight * quad;
    if (std::abs(denom) < kUpdateTol) throw DegenerateUpdateError("rank_one_update: update would be singular");
    if (weight < 0.0 && denom < 0.0)
        throw DegenerateUpdateError("rank_one_update: downdate would lose positive definiteness");

    GramInverse out = g;
    const double scale = weight / denom;
    const std::size_t n = g.dim;
    for (std::size_t i = 0; i < n; ++i) {
        const double si = scale * iv[i];
        for (std::size_t j = 0; j < n; ++j) out.inverse(i, j) -= si * iv[j];
    }
    return out;
}

std::vector<double> symmetric_eigenvalues(const DenseMatrix& m) {
    if (m.rows() != m.cols()) throw InvalidArgumentError("symmetric_eigenvalues: matrix not square");
    if (asymmetry(m) > 1e-9) throw NotSymmetricError("symmetric_eigenvalues: input not symmetric");

    const std::size_t n = m.rows();
    DenseMatrix a = m;
    // symmetrize exactly so sweeps preserve symmetry bit for bit
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = v;
            a(j, i) = v;
        }

    double frob = 0.0;
    for (double v : a.data()) frob += v * v;
    const double stop = 1e-28 * std::max(frob, 1e-300);

    // cyclic-by-row Jacobi sweeps
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off <= stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double diff = a(q, q) - a(p, p);
                double t;
                if (std::abs(apq) < 1e-300 * std::abs(diff)) {
                    t = apq / diff;
                } else {
                    const double theta = diff / (2.0 * apq);
                    t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                    if (theta < 0.0) t = -t;
                }
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const double tau = s / (1.0 + c);

                const double app = a(p, p);
                const double aqq = a(q, q);
                a(p, p) = app - t * apq;
                a(q, q) = aqq + t * apq;
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    if (k == p || k == q) continue;
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = akp - s * (akq + tau * akp);
                    a(p, k) = a(k, p);
                    a(k, q) = akq + s * (akp - tau * akq);
                    a(q, k) = a(k, q);
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> mat_vec(const DenseMatrix& m, std::span<const double> v) {
    if (v.size() != m.cols()) throw InvalidArgumentError("mat_vec: size mismatch");
    std::vector<double> out(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * v[j];
        out[i] = s;
    }
    return out;
}

}  // namespace oid
