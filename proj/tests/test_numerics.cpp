#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sfp/errors.hpp"
#include "sfp/matrix.hpp"
#include "sfp/rng.hpp"
#include "sfp/svd.hpp"

using namespace sfp;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

double max_orthonormality_defect(const Matrix& u) {
    const Matrix gram = matmul_tn(u, u);
    double worst = 0.0;
    for (std::size_t i = 0; i < gram.rows(); ++i) {
        for (std::size_t j = 0; j < gram.cols(); ++j) {
            const double want = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::fabs(gram(i, j) - want));
        }
    }
    return worst;
}

// Eigenvalues of a symmetric 3x3 matrix by the trigonometric closed form;
// an implementation-independent route to the singular values of a 5x3
// matrix via M^T M.
std::vector<double> symmetric3_eigenvalues(const Matrix& a) {
    const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
    const double p2 = (a(0, 0) - q) * (a(0, 0) - q) + (a(1, 1) - q) * (a(1, 1) - q) +
                      (a(2, 2) - q) * (a(2, 2) - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    Matrix b = a;
    for (int i = 0; i < 3; ++i) b(i, i) -= q;
    b *= 1.0 / p;
    const double det_b = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                         b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                         b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    const double r = std::clamp(det_b / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double e1 = q + 2.0 * p * std::cos(phi);
    const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    const double e2 = 3.0 * q - e1 - e3;
    std::vector<double> eig = {e1, e2, e3};
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

// Least-squares row-space projector M^T (M M^T)^+ M via Gauss-Jordan with
// full pivoting on the (small) Gram matrix.
Matrix brute_row_projector(const Matrix& m) {
    const std::size_t r = m.rows();
    Matrix gram = matmul_nt(m, m);
    // pseudo-inverse through eigen-free route: solve on the numerical range
    // using Gauss-Jordan with pivot skipping
    Matrix inv = Matrix::identity(r);
    Matrix work = gram;
    std::vector<bool> used(r, false);
    for (std::size_t step = 0; step < r; ++step) {
        std::size_t pivot = r;
        double best = 1e-9;
        for (std::size_t i = 0; i < r; ++i) {
            if (!used[i] && std::fabs(work(i, i)) > best) {
                best = std::fabs(work(i, i));
                pivot = i;
            }
        }
        if (pivot == r) break;
        used[pivot] = true;
        const double scale = 1.0 / work(pivot, pivot);
        for (std::size_t j = 0; j < r; ++j) {
            work(pivot, j) *= scale;
            inv(pivot, j) *= scale;
        }
        for (std::size_t i = 0; i < r; ++i) {
            if (i == pivot) continue;
            const double factor = work(i, pivot);
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < r; ++j) {
                work(i, j) -= factor * work(pivot, j);
                inv(i, j) -= factor * inv(pivot, j);
            }
        }
    }
    // zero out rows/cols never pivoted (null directions)
    for (std::size_t i = 0; i < r; ++i) {
        if (used[i]) continue;
        for (std::size_t j = 0; j < r; ++j) {
            inv(i, j) = 0.0;
            inv(j, i) = 0.0;
        }
    }
    return matmul(matmul_tn(m, inv), m);
}

}  // namespace

TEST_CASE("svd of the identity has unit spectrum") {
    const SvdResult d = svd(Matrix::identity(3));
    REQUIRE(d.s.size() == 3);
    for (double s : d.s) CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svd of a forced rank-1 matrix") {
    const SvdResult d = svd(Matrix{{0.0, 2.0}, {0.0, 0.0}});
    REQUIRE(d.s.size() == 2);
    CHECK(d.s[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(d.s[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(max_orthonormality_defect(d.u) < 1e-9);
    CHECK(max_orthonormality_defect(d.v) < 1e-9);
    CHECK(relative_error(d.reconstruct(), Matrix{{0.0, 2.0}, {0.0, 0.0}}) < 1e-12);
}

TEST_CASE("seeded 5x3 svd matches the characteristic-polynomial oracle") {
    const Matrix m = random_matrix(5, 3, 42);
    const SvdResult d = svd(m);
    CHECK(relative_error(d.reconstruct(), m) < 1e-10);

    const std::vector<double> eig = symmetric3_eigenvalues(matmul_tn(m, m));
    REQUIRE(d.s.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(d.s[i] == doctest::Approx(std::sqrt(std::max(eig[i], 0.0))).epsilon(1e-9));
    }
}

TEST_CASE("svd invariants hold on random matrices up to 32x32") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        Rng shape_rng(seed * 7);
        const std::size_t rows = 1 + shape_rng.uniform_index(32);
        const std::size_t cols = 1 + shape_rng.uniform_index(32);
        const Matrix m = random_matrix(rows, cols, seed);
        const SvdResult d = svd(m);
        CHECK(max_orthonormality_defect(d.u) < 1e-9);
        CHECK(max_orthonormality_defect(d.v) < 1e-9);
        CHECK(relative_error(d.reconstruct(), m) < 1e-8);
        CHECK(std::is_sorted(d.s.begin(), d.s.end(), std::greater<>()));
        for (double s : d.s) CHECK(s >= 0.0);
    }
}

TEST_CASE("svd rejects non-finite input") {
    Matrix m(2, 2);
    m(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd(m), Error);
}

TEST_CASE("orthonormal_row_basis on an axis-aligned matrix") {
    const Matrix basis = orthonormal_row_basis(Matrix{{2.0, 0.0}, {0.0, 0.0}});
    REQUIRE(basis.rows() == 2);
    REQUIRE(basis.cols() == 1);
    CHECK(std::fabs(std::fabs(basis(0, 0)) - 1.0) < 1e-12);
    CHECK(std::fabs(basis(1, 0)) < 1e-12);
}

TEST_CASE("duplicated rows do not change the rank") {
    const Matrix m{{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}};
    CHECK(orthonormal_row_basis(m).cols() == 1);
}

TEST_CASE("rank-2 construction reproduces the least-squares projector") {
    const Matrix left = random_matrix(6, 2, 7);
    const Matrix right = random_matrix(2, 4, 8);
    const Matrix m = matmul(left, right);  // 6x4, rank 2

    const Matrix basis = orthonormal_row_basis(m);
    REQUIRE(basis.cols() == 2);
    CHECK(max_orthonormality_defect(basis) < 1e-9);

    const Matrix projector = matmul_nt(basis, basis);  // B B^T
    const Matrix oracle = brute_row_projector(m);
    CHECK(frobenius_distance(projector, oracle) < 1e-8);

    // M B B^T == M within tol-scaled error
    CHECK(relative_error(matmul(m, projector), m) < 1e-9);
}

TEST_CASE("orthonormal_row_basis rejects the zero matrix") {
    CHECK_THROWS_AS(orthonormal_row_basis(Matrix(3, 3)), Error);
}

TEST_CASE("energy_rank direct cases") {
    CHECK(energy_rank({3.0, 1.0}, 0.9) == 1);
    CHECK(energy_rank({1.0, 1.0, 1.0, 1.0}, 1.0) == 4);
    CHECK_THROWS_AS(energy_rank({1.0}, 0.0), Error);
    CHECK_THROWS_AS(energy_rank({1.0}, 1.5), Error);
}

TEST_CASE("energy_rank matches the cumulative-sum oracle") {
    const std::vector<double> s = {5.0, 4.0, 3.0, 2.0, 1.0};
    for (double tau : {0.25, 0.5, 0.8, 0.95, 1.0}) {
        double total = 0.0;
        for (double x : s) total += x * x;
        double cum = 0.0;
        std::size_t expect = s.size();
        for (std::size_t k = 0; k < s.size(); ++k) {
            cum += s[k] * s[k];
            if (cum >= tau * total) {
                expect = k + 1;
                break;
            }
        }
        CHECK(energy_rank(s, tau) == expect);
    }
}

TEST_CASE("low_rank_approx identity and forced cases") {
    const Matrix m = random_matrix(4, 4, 11);
    const SvdResult d = svd(m);
    CHECK(relative_error(low_rank_approx(d, d.s.size()), m) < 1e-8);

    const SvdResult diag = svd(Matrix{{3.0, 0.0}, {0.0, 1.0}});
    const Matrix k1 = low_rank_approx(diag, 1);
    CHECK(k1(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::fabs(k1(0, 1)) < 1e-12);
    CHECK(std::fabs(k1(1, 0)) < 1e-12);
    CHECK(std::fabs(k1(1, 1)) < 1e-12);

    CHECK_THROWS_AS(low_rank_approx(d, 0), Error);
    CHECK_THROWS_AS(low_rank_approx(d, d.s.size() + 1), Error);
}

TEST_CASE("Eckart-Young: truncation error equals the tail energy") {
    for (std::uint64_t seed = 21; seed <= 28; ++seed) {
        Rng shape_rng(seed);
        const std::size_t rows = 2 + shape_rng.uniform_index(31);
        const std::size_t cols = 2 + shape_rng.uniform_index(31);
        const Matrix m = random_matrix(rows, cols, seed * 3);
        const SvdResult d = svd(m);
        const std::size_t k = 1 + shape_rng.uniform_index(d.s.size());
        double tail = 0.0;
        for (std::size_t i = k; i < d.s.size(); ++i) tail += d.s[i] * d.s[i];
        const double err = frobenius_distance(low_rank_approx(d, k), m);
        CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));
    }
}
