#include "sfp/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfp/errors.hpp"

namespace sfp {

namespace {

constexpr int kMaxSweeps = 64;

// One-sided Jacobi on a tall (or square) matrix A (m x n, m >= n is not
// required but keeps sweeps cheap; the caller transposes as needed).
// Rotations orthogonalize the columns of A in place while V accumulates
// them; afterwards the column norms are the singular values.
void jacobi_columns(Matrix& a, Matrix& v) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    v = Matrix::identity(n);
    if (n < 2) return;

    const double eps = 1e-15;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    app += aip * aip;
                    aqq += aiq * aiq;
                    apq += aip * aiq;
                }
                if (std::fabs(apq) <= eps * std::sqrt(app * aqq)) continue;
                rotated = true;

                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t i = 0; i < m; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
        if (!rotated) return;
    }
    throw Error(ErrorCode::NumericalFailure, "Jacobi SVD did not converge");
}

// Replaces (near-)null columns of u with vectors orthonormal to all kept
// columns, so U keeps orthonormal columns even for rank-deficient input.
void complete_null_columns(Matrix& u, const std::vector<double>& s, double sigma_max) {
    const std::size_t m = u.rows();
    const std::size_t k = u.cols();
    const double cutoff = sigma_max * 1e-13;
    for (std::size_t j = 0; j < k; ++j) {
        if (s[j] > cutoff) continue;
        // try canonical axes, Gram-Schmidt against every earlier column
        for (std::size_t axis = 0; axis < m; ++axis) {
            std::vector<double> cand(m, 0.0);
            cand[axis] = 1.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (c == j) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += cand[i] * u(i, c);
                for (std::size_t i = 0; i < m; ++i) cand[i] -= dot * u(i, c);
            }
            double norm = 0.0;
            for (double x : cand) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 0.5) {  // axis not already (almost) in the span
                for (std::size_t i = 0; i < m; ++i) u(i, j) = cand[i] / norm;
                break;
            }
        }
    }
}

}  // namespace

Matrix SvdResult::reconstruct() const { return reconstruct(s.size()); }

Matrix SvdResult::reconstruct(std::size_t rank) const {
    Matrix out(u.rows(), v.rows());
    for (std::size_t r = 0; r < rank && r < s.size(); ++r) {
        const double sr = s[r];
        for (std::size_t i = 0; i < u.rows(); ++i) {
            const double usi = sr * u(i, r);
            double* orow = out.row_ptr(i);
            for (std::size_t j = 0; j < v.rows(); ++j) orow[j] += usi * v(j, r);
        }
    }
    return out;
}

SvdResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0) {
        throw Error(ErrorCode::InvalidInput, "svd of empty matrix");
    }
    if (!m.all_finite()) {
        throw Error(ErrorCode::InvalidInput, "svd of non-finite matrix");
    }

    const bool transpose = m.rows() < m.cols();
    Matrix a = transpose ? m.transposed() : m;  // rows >= cols
    Matrix v;
    jacobi_columns(a, v);

    const std::size_t k = a.cols();
    std::vector<double> s(k);
    Matrix u(a.rows(), k);
    for (std::size_t j = 0; j < k; ++j) {
        double norm = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) norm += a(i, j) * a(i, j);
        norm = std::sqrt(norm);
        s[j] = norm;
        if (norm > 0.0) {
            for (std::size_t i = 0; i < a.rows(); ++i) u(i, j) = a(i, j) / norm;
        }
    }

    // sort descending
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t lhs, std::size_t rhs) { return s[lhs] > s[rhs]; });
    SvdResult result;
    result.s.resize(k);
    result.u = Matrix(u.rows(), k);
    result.v = Matrix(v.rows(), k);
    for (std::size_t j = 0; j < k; ++j) {
        result.s[j] = s[order[j]];
        for (std::size_t i = 0; i < u.rows(); ++i) result.u(i, j) = u(i, order[j]);
        for (std::size_t i = 0; i < v.rows(); ++i) result.v(i, j) = v(i, order[j]);
    }

    const double sigma_max = result.s.empty() ? 0.0 : result.s.front();
    complete_null_columns(result.u, result.s, std::max(sigma_max, 1.0));

    if (transpose) std::swap(result.u, result.v);
    return result;
}

Matrix orthonormal_row_basis(const Matrix& m, double tol) {
    if (tol <= 0.0) {
        throw Error(ErrorCode::InvalidInput, "tolerance must be positive");
    }
    if (m.is_zero()) {
        throw Error(ErrorCode::ZeroMatrix, "row basis of zero matrix");
    }
    // Row space of M = span of the right singular vectors with nonzero
    // singular values.
    const SvdResult d = svd(m);
    const double cutoff = d.s.front() * tol;
    std::size_t rank = 0;
    while (rank < d.s.size() && d.s[rank] > cutoff) ++rank;
    return d.v.cols_range(0, rank);
}

std::size_t energy_rank(const std::vector<double>& s, double tau) {
    if (tau <= 0.0 || tau > 1.0) {
        throw Error(ErrorCode::InvalidInput, "tau must lie in (0, 1]");
    }
    double total = 0.0;
    for (double x : s) total += x * x;
    if (total <= 0.0 || s.empty()) {
        throw Error(ErrorCode::InvalidInput, "energy_rank of all-zero spectrum");
    }
    double cum = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k] * s[k];
        if (cum >= tau * total) return k + 1;
    }
    return s.size();
}

Matrix low_rank_approx(const SvdResult& d, std::size_t k) {
    if (k < 1 || k > d.s.size()) {
        throw Error(ErrorCode::InvalidInput, "rank out of range");
    }
    return d.reconstruct(k);
}

}  // namespace sfp
