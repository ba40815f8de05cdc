#ifndef SFP_SVD_HPP
#define SFP_SVD_HPP

#include <cstddef>
#include <vector>

#include "sfp/matrix.hpp"

namespace sfp {

/// Compact singular value decomposition M = U * diag(S) * V^T with
/// k = min(rows, cols). U and V always carry orthonormal columns, also
/// across rank-deficient inputs (null directions are completed to an
/// orthonormal set).
struct SvdResult {
    Matrix u;                // m x k
    std::vector<double> s;   // k values, descending, >= 0
    Matrix v;                // n x k

    Matrix reconstruct() const;
    Matrix reconstruct(std::size_t rank) const;
};

/// One-sided Jacobi SVD. Deterministic, dependency-free, accurate at the
/// matrix sizes this project works with (up to a few thousand rows).
/// Throws InvalidInput on non-finite input, NumericalFailure if the sweep
/// limit is exhausted before the off-diagonal mass converges.
SvdResult svd(const Matrix& m);

/// Orthonormal basis of the row space of `m`, returned as a d x r matrix
/// (d = cols of m, r = numerical rank at threshold tol * sigma_max).
/// Throws ZeroMatrix when `m` has no nonzero entry.
Matrix orthonormal_row_basis(const Matrix& m, double tol = 1e-10);

/// Smallest k such that the top-k squared singular values hold at least
/// `tau` of the total squared mass. tau must lie in (0, 1].
std::size_t energy_rank(const std::vector<double>& s, double tau);

/// Best rank-k approximation assembled from a decomposition.
Matrix low_rank_approx(const SvdResult& d, std::size_t k);

}  // namespace sfp

#endif  // SFP_SVD_HPP
