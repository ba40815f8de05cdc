#include "sfp/subspace.hpp"

#include <algorithm>
#include <cmath>

#include "sfp/errors.hpp"

namespace sfp::subspace {

namespace {

// Rectangular-diagonal left-multiply: out = diag(values) * m, where the
// diagonal has `rows` rows. Entries beyond values.size() are zero.
Matrix rect_diag_mul(const std::vector<double>& values, std::size_t rows, const Matrix& m) {
    Matrix out(rows, m.cols());
    const std::size_t k = std::min({values.size(), rows, m.rows()});
    for (std::size_t i = 0; i < k; ++i) {
        const double s = values[i];
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = s * m(i, j);
    }
    return out;
}

Matrix outer_product_sum(const Matrix& left, const Matrix& right,
                         const std::vector<double>& sigma, std::size_t count, double weight) {
    Matrix out(left.rows(), right.rows());
    for (std::size_t i = 0; i < count; ++i) {
        const double w = weight * sigma[i];
        for (std::size_t r = 0; r < left.rows(); ++r) {
            const double lw = w * left(r, i);
            double* orow = out.row_ptr(r);
            for (std::size_t c = 0; c < right.rows(); ++c) orow[c] += lw * right(c, i);
        }
    }
    return out;
}

}  // namespace

void validate(const DomainSpec& spec) {
    if (spec.x_id.rows() < 1 || spec.x_ood.rows() < 1) {
        throw Error(ErrorCode::InvalidInput, "both domains need at least one sample");
    }
    if (spec.x_id.cols() != spec.x_ood.cols()) {
        throw Error(ErrorCode::InvalidInput, "domain feature dimensions differ");
    }
    if (std::fabs(spec.p_i + spec.p_o - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidInput, "proportions must sum to 1");
    }
    if (spec.p_i <= 0.0 || spec.p_i >= 1.0) {
        throw Error(ErrorCode::InvalidInput, "p_i must lie in (0, 1)");
    }
    if (!spec.x_id.all_finite() || !spec.x_ood.all_finite()) {
        throw Error(ErrorCode::InvalidInput, "non-finite domain data");
    }
}

SubspaceBases build_bases(const Matrix& w, const DomainSpec& spec) {
    validate(spec);
    if (w.is_zero()) throw Error(ErrorCode::ZeroMatrix, "model weights are all-zero");
    if (spec.x_id.is_zero()) throw Error(ErrorCode::ZeroMatrix, "x_id is all-zero");
    if (spec.x_ood.is_zero()) throw Error(ErrorCode::ZeroMatrix, "x_ood is all-zero");
    if (w.cols() != spec.x_id.cols()) {
        throw Error(ErrorCode::InvalidInput, "model and data dimensions differ");
    }

    SubspaceBases out;
    out.e = orthonormal_row_basis(w);
    out.f = orthonormal_row_basis(spec.x_id);
    out.g = orthonormal_row_basis(spec.x_ood);
    // X_id^T = F Z  =>  Z = F^T X_id^T  (exact: F spans the row space)
    out.z = matmul_tn(out.f, spec.x_id.transposed());
    out.v = matmul_tn(out.g, spec.x_ood.transposed());
    return out;
}

ProjectionDecomposition projection_spectrum(const SubspaceBases& b) {
    const Matrix ef = matmul_tn(b.e, b.f);
    const Matrix eg = matmul_tn(b.e, b.g);
    const Matrix fg = matmul_tn(b.f, b.g);

    ProjectionDecomposition out;
    const SvdResult ef_svd = svd(ef);
    out.sigma_ef = ef_svd.s;
    out.xi = ef_svd.u;
    out.lambda = ef_svd.v;

    const SvdResult eg_svd = svd(eg);
    out.sigma_eg = eg_svd.s;
    out.gamma = eg_svd.v;

    out.sigma_fg = svd(fg).s;
    return out;
}

double task_loss(const Matrix& w_t, const Matrix& x, const Matrix& w_star) {
    Matrix delta = w_t;
    delta -= w_star;
    const Matrix residual = matmul_nt(x, delta);  // n x m
    const double n = static_cast<double>(x.rows());
    const double f = residual.frobenius_norm();
    return f * f / n;
}

Matrix brute_gradient(const Matrix& w_t, const Matrix& x, const Matrix& w_star) {
    Matrix delta = w_t;
    delta -= w_star;
    const Matrix residual = matmul_nt(x, delta);     // n x m
    Matrix grad = matmul_tn(residual, x);            // m x d
    grad *= 2.0 / static_cast<double>(x.rows());
    return grad;
}

double mixture_loss(const Matrix& w_t, const DomainSpec& spec, const Matrix& w_star) {
    return spec.p_i * task_loss(w_t, spec.x_id, w_star) +
           spec.p_o * task_loss(w_t, spec.x_ood, w_star);
}

Matrix mixture_gradient(const Matrix& w_t, const DomainSpec& spec, const Matrix& w_star) {
    Matrix grad = brute_gradient(w_t, spec.x_id, w_star);
    grad *= spec.p_i;
    Matrix ood = brute_gradient(w_t, spec.x_ood, w_star);
    ood *= spec.p_o;
    grad += ood;
    return grad;
}

Matrix combined_coordinates(const Matrix& a, const Matrix& b,
                            const ProjectionDecomposition& decomp,
                            const DomainSpec& spec, std::size_t dim_r) {
    Matrix r = rect_diag_mul(decomp.sigma_ef, dim_r, a);
    r *= spec.p_i;
    Matrix rb = rect_diag_mul(decomp.sigma_eg, dim_r, b);
    rb *= spec.p_o;
    r += rb;
    return r;
}

Matrix linear_gradient(const ModelCoordinates& coords,
                       const ProjectionDecomposition& decomp,
                       const DomainSpec& spec) {
    const std::size_t dim_s = coords.a.rows();
    const std::size_t dim_u = coords.b.rows();
    const std::size_t m = coords.a.cols();
    if (coords.b.cols() != m || coords.a_star.rows() != dim_s || coords.b_star.rows() != dim_u) {
        throw Error(ErrorCode::InvalidInput, "coordinate shapes are inconsistent");
    }
    // The closed form treats the datasets as the coordinate frames, so the
    // row counts must match the coordinate dimensions.
    if (spec.x_id.rows() != dim_s || spec.x_ood.rows() != dim_u) {
        throw Error(ErrorCode::InvalidInput,
                    "dataset row counts do not match coordinate dimensions");
    }

    Matrix a_tilde = coords.a;
    a_tilde -= coords.a_star;
    Matrix b_tilde = coords.b;
    b_tilde -= coords.b_star;
    const Matrix at = a_tilde.transposed();  // m x dim_s
    const Matrix bt = b_tilde.transposed();  // m x dim_u

    const double inv_p = 1.0 / static_cast<double>(spec.x_id.rows());
    const double inv_q = 1.0 / static_cast<double>(spec.x_ood.rows());

    // diag(sigma_ef^2), diag(sigma_eg^2) and the cross products
    std::vector<double> ef2(dim_s, 0.0), eg2(dim_u, 0.0);
    for (std::size_t i = 0; i < std::min(dim_s, decomp.sigma_ef.size()); ++i) {
        ef2[i] = decomp.sigma_ef[i] * decomp.sigma_ef[i];
    }
    for (std::size_t i = 0; i < std::min(dim_u, decomp.sigma_eg.size()); ++i) {
        eg2[i] = decomp.sigma_eg[i] * decomp.sigma_eg[i];
    }
    const std::size_t k_cross = std::min(decomp.sigma_ef.size(), decomp.sigma_eg.size());
    std::vector<double> cross(k_cross, 0.0);
    for (std::size_t i = 0; i < k_cross; ++i) {
        cross[i] = decomp.sigma_ef[i] * decomp.sigma_eg[i];
    }

    // 2 p_i^2 a~^T S_ef^2 Xbar_id
    Matrix grad = matmul(at, rect_diag_mul(ef2, dim_s, spec.x_id));
    grad *= spec.p_i * spec.p_i * inv_p;

    Matrix term = matmul(bt, rect_diag_mul(eg2, dim_u, spec.x_ood));
    term *= spec.p_o * spec.p_o * inv_q;
    grad += term;

    term = matmul(at, rect_diag_mul(cross, dim_s, spec.x_ood));
    term *= spec.p_i * spec.p_o * inv_q;
    grad += term;

    term = matmul(bt, rect_diag_mul(cross, dim_u, spec.x_id));
    term *= spec.p_i * spec.p_o * inv_p;
    grad += term;

    grad *= 2.0;
    return grad;
}

SimulationResult simulate_undirected_training(const DomainSpec& spec, const Matrix& w0,
                                              const Matrix& w_star, double lr,
                                              std::size_t steps) {
    return simulate_undirected_training(spec, w0, w_star, lr, steps, {});
}

SimulationResult simulate_undirected_training(
    const DomainSpec& spec, const Matrix& w0, const Matrix& w_star, double lr,
    std::size_t steps, const std::function<void(std::size_t, const Matrix&)>& observer) {
    validate(spec);
    if (lr <= 0.0) throw Error(ErrorCode::InvalidInput, "learning rate must be positive");

    SimulationResult result;
    result.steps.reserve(steps + 1);
    Matrix w = w0;
    for (std::size_t t = 0; t <= steps; ++t) {
        SimStep record;
        record.loss_id = task_loss(w, spec.x_id, w_star);
        record.loss_ood = task_loss(w, spec.x_ood, w_star);
        if (!std::isfinite(record.loss_id) || !std::isfinite(record.loss_ood)) {
            throw Error(ErrorCode::Diverged, "simulation diverged", static_cast<long>(t));
        }
        result.steps.push_back(record);
        if (t == steps) break;
        if (observer) observer(t, w);
        Matrix grad = mixture_gradient(w, spec, w_star);
        grad *= lr;
        w -= grad;
    }
    result.final_w = std::move(w);
    return result;
}

double directional_gap(const ProjectionDecomposition& decomp, const DomainSpec& spec) {
    const double s_ef = decomp.sigma_ef.empty() ? 0.0 : decomp.sigma_ef.front();
    const double s_eg = decomp.sigma_eg.empty() ? 0.0 : decomp.sigma_eg.front();
    return 2.0 * (spec.p_i * spec.p_i * s_ef * s_ef - spec.p_o * spec.p_o * s_eg * s_eg);
}

double loss_gap_prediction(const DomainSpec& spec, double sigma_fg_max, double epsilon) {
    if (sigma_fg_max < -1e-12 || sigma_fg_max > 1.0 + 1e-9) {
        throw Error(ErrorCode::InvalidInput, "sigma_fg_max outside [0, 1]");
    }
    return (spec.p_i * spec.p_i - spec.p_o * spec.p_o) * (1.0 - sigma_fg_max) + epsilon;
}

Matrix projection_space(const ProjectionDecomposition& decomp, const DomainSpec& spec) {
    const std::size_t k_id =
        std::min({decomp.sigma_ef.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.lambda.cols())});
    const std::size_t k_ood =
        std::min({decomp.sigma_eg.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.gamma.cols())});

    const Matrix p_id = outer_product_sum(decomp.xi, decomp.lambda, decomp.sigma_ef, k_id, spec.p_i);
    const Matrix p_ood = outer_product_sum(decomp.xi, decomp.gamma, decomp.sigma_eg, k_ood, spec.p_o);

    Matrix out(decomp.xi.rows(), p_id.cols() + p_ood.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < p_id.cols(); ++c) out(r, c) = p_id(r, c);
        for (std::size_t c = 0; c < p_ood.cols(); ++c) out(r, p_id.cols() + c) = p_ood(r, c);
    }
    return out;
}

Matrix sparse_projection(const ProjectionDecomposition& decomp, const DomainSpec& spec,
                         std::size_t theta) {
    const std::size_t m = decomp.xi.rows();
    if (theta < 1 || theta > m) {
        throw Error(ErrorCode::InvalidInput, "theta out of range");
    }
    const std::size_t k_id =
        std::min({decomp.sigma_ef.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.lambda.cols()), theta});
    const std::size_t k_ood =
        std::min({decomp.sigma_eg.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.gamma.cols())});

    const Matrix p_id = outer_product_sum(decomp.xi, decomp.lambda, decomp.sigma_ef, k_id, spec.p_i);
    const Matrix p_ood = outer_product_sum(decomp.xi, decomp.gamma, decomp.sigma_eg, k_ood, spec.p_o);

    Matrix out(decomp.xi.rows(), p_id.cols() + p_ood.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < p_id.cols(); ++c) out(r, c) = p_id(r, c);
        for (std::size_t c = 0; c < p_ood.cols(); ++c) out(r, p_id.cols() + c) = p_ood(r, c);
    }
    return out;
}

Matrix model_response(const Matrix& projection, const Matrix& x_coords) {
    if (projection.cols() != x_coords.cols()) {
        throw Error(ErrorCode::InvalidInput, "projection/data coordinate widths differ");
    }
    return matmul_nt(projection, x_coords);
}

Matrix feature_coordinates(const SubspaceBases& bases, const Matrix& x) {
    // [x F | x G]
    const Matrix xf = matmul(x, bases.f);
    const Matrix xg = matmul(x, bases.g);
    Matrix out(x.rows(), xf.cols() + xg.cols());
    for (std::size_t r = 0; r < out.rows(); ++r) {
        for (std::size_t c = 0; c < xf.cols(); ++c) out(r, c) = xf(r, c);
        for (std::size_t c = 0; c < xg.cols(); ++c) out(r, xf.cols() + c) = xg(r, c);
    }
    return out;
}

double response_deviation_ratio(const ProjectionDecomposition& decomp,
                                const DomainSpec& spec, std::size_t theta) {
    const std::size_t m = decomp.xi.rows();
    if (theta < 1 || theta > m) {
        throw Error(ErrorCode::InvalidInput, "theta out of range");
    }
    // On canonical (basis-unit) data each block responds with its own
    // outer-product sum, so the ID and OOD responses occupy disjoint
    // column blocks and the squared Frobenius norms add.
    const std::size_t k_id =
        std::min({decomp.sigma_ef.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.lambda.cols())});
    const std::size_t k_id_sparse = std::min(k_id, theta);

    double id_full = 0.0, id_sparse = 0.0, ood = 0.0;
    for (std::size_t i = 0; i < k_id; ++i) {
        const double s2 = decomp.sigma_ef[i] * decomp.sigma_ef[i];
        id_full += s2;
        if (i < k_id_sparse) id_sparse += s2;
    }
    const std::size_t k_ood =
        std::min({decomp.sigma_eg.size(), static_cast<std::size_t>(decomp.xi.cols()),
                  static_cast<std::size_t>(decomp.gamma.cols())});
    for (std::size_t i = 0; i < k_ood; ++i) {
        ood += decomp.sigma_eg[i] * decomp.sigma_eg[i];
    }

    const double pi2 = spec.p_i * spec.p_i;
    const double po2 = spec.p_o * spec.p_o;
    const double num = std::sqrt(po2 * ood + pi2 * id_full);
    const double den = std::sqrt(po2 * ood + pi2 * id_sparse);
    if (den < 1e-12) {
        throw Error(ErrorCode::DegenerateDenominator, "sparse response difference vanishes");
    }
    return num / den;
}

}  // namespace sfp::subspace
