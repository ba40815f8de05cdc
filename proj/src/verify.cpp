#include "sfp/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sfp/datasets.hpp"
#include "sfp/errors.hpp"
#include "sfp/rng.hpp"

namespace sfp::verify {

namespace {

using subspace::DomainSpec;
using subspace::ModelCoordinates;
using subspace::ProjectionDecomposition;
using subspace::SubspaceBases;

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

Matrix random_orthonormal(std::size_t d, std::size_t k, Rng& rng) {
    Matrix q(d, k);
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> col(d);
        for (;;) {
            for (std::size_t i = 0; i < d; ++i) col[i] = rng.normal();
            for (std::size_t c = 0; c < j; ++c) {
                double dot = 0.0;
                for (std::size_t i = 0; i < d; ++i) dot += col[i] * q(i, c);
                for (std::size_t i = 0; i < d; ++i) col[i] -= dot * q(i, c);
            }
            double norm = 0.0;
            for (double x : col) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-8) {
                for (std::size_t i = 0; i < d; ++i) q(i, j) = col[i] / norm;
                break;
            }
        }
    }
    return q;
}

// W = (E (p_i E^T F a + p_o E^T G b))^T, using the true basis products.
Matrix assemble_weights(const SubspaceBases& bases, const Matrix& a, const Matrix& b,
                        double p_i, double p_o) {
    Matrix r = matmul(matmul_tn(bases.e, bases.f), a);
    r *= p_i;
    Matrix rb = matmul(matmul_tn(bases.e, bases.g), b);
    rb *= p_o;
    r += rb;
    return matmul(bases.e, r).transposed();
}

struct PairedRuns {
    train::TrainResult erm;
    train::TrainResult sfp;
    datasets::LinearTaskBundle bundle;
};

PairedRuns run_paired(std::uint64_t seed) {
    PairedRuns out;
    out.bundle = datasets::gen_linear_task(2, 2, 2, 0.8, 0.2, 400, 0.02, seed, 3);
    const train::SfpConfig cfg = paired_run_config(seed);
    const std::vector<const datasets::Environment*> envs = {&out.bundle.train};
    out.erm = train::train(train::Method::Erm, cfg, envs);
    out.sfp = train::train(train::Method::Sfp, cfg, envs);
    return out;
}

}  // namespace

double block_response(const Matrix& w, const Matrix& block) {
    if (block.cols() == 0) return 0.0;
    return matmul(w, block).frobenius_norm();
}

train::SfpConfig paired_run_config(std::uint64_t seed) {
    train::SfpConfig cfg;
    cfg.p_i = 0.8;
    cfg.p_o = 0.2;
    cfg.lr = 0.05;
    cfg.epochs = 30;
    cfg.batch_size = 64;
    cfg.ident_mode = train::IdentMode::Textual;
    cfg.eta_mode = train::EtaMode::TwoSqrtLoss;
    cfg.prune = false;
    cfg.seed = seed;
    return cfg;
}

AlignedInstance make_aligned_instance(std::size_t m, std::size_t dim_s, std::size_t dim_u,
                                      double p_i, std::uint64_t seed, bool overlap) {
    if (dim_s > m || dim_u > m) {
        throw Error(ErrorCode::InvalidInput, "paired blocks need dim_s, dim_u <= m");
    }
    if (!overlap && dim_s + dim_u > m) {
        throw Error(ErrorCode::InvalidInput, "disjoint pairing needs dim_s + dim_u <= m");
    }
    Rng rng(seed);
    const std::size_t d = m + dim_s + dim_u;

    // descending cosines keep the planted order identical to the SVD order
    auto planted_cosines = [&](std::size_t k) {
        std::vector<double> c(k);
        for (double& x : c) x = rng.uniform(0.15, 0.95);
        std::sort(c.begin(), c.end(), std::greater<>());
        return c;
    };
    const std::vector<double> cos_f = planted_cosines(dim_s);
    const std::vector<double> cos_g = planted_cosines(dim_u);

    AlignedInstance inst;
    inst.bases.e = Matrix(d, m);
    for (std::size_t i = 0; i < m; ++i) inst.bases.e(i, i) = 1.0;

    inst.bases.f = Matrix(d, dim_s);
    for (std::size_t i = 0; i < dim_s; ++i) {
        inst.bases.f(i, i) = cos_f[i];
        inst.bases.f(m + i, i) = std::sqrt(1.0 - cos_f[i] * cos_f[i]);
    }
    inst.bases.g = Matrix(d, dim_u);
    for (std::size_t j = 0; j < dim_u; ++j) {
        const std::size_t pair_axis = overlap ? j : dim_s + j;
        inst.bases.g(pair_axis, j) = cos_g[j];
        inst.bases.g(m + dim_s + j, j) = std::sqrt(1.0 - cos_g[j] * cos_g[j]);
    }

    inst.spec.x_id = inst.bases.f.transposed();
    inst.spec.x_ood = inst.bases.g.transposed();
    inst.spec.p_i = p_i;
    inst.spec.p_o = 1.0 - p_i;
    inst.bases.z = matmul_tn(inst.bases.f, inst.spec.x_id.transposed());
    inst.bases.v = matmul_tn(inst.bases.g, inst.spec.x_ood.transposed());

    inst.coords.a = random_matrix(dim_s, m, rng);
    inst.coords.a_star = random_matrix(dim_s, m, rng);
    inst.coords.b = random_matrix(dim_u, m, rng);
    inst.coords.b_star = random_matrix(dim_u, m, rng);
    inst.w_t = assemble_weights(inst.bases, inst.coords.a, inst.coords.b, p_i, 1.0 - p_i);
    inst.w_star =
        assemble_weights(inst.bases, inst.coords.a_star, inst.coords.b_star, p_i, 1.0 - p_i);

    const Matrix ef = matmul_tn(inst.bases.e, inst.bases.f);
    const Matrix eg = matmul_tn(inst.bases.e, inst.bases.g);
    Matrix r = matmul(ef, inst.coords.a);
    r *= p_i;
    Matrix rb = matmul(eg, inst.coords.b);
    rb *= 1.0 - p_i;
    r += rb;
    inst.coords.r = r;
    return inst;
}

subspace::DomainSpec make_mirrored_spec(double p_i, std::uint64_t seed, bool identical_domains,
                                        Matrix* w_star_out) {
    Rng rng(seed);
    const std::size_t d_block = 2, d_inv = 2, d = 6, n = 32, outputs = 2;
    const Matrix q = random_orthonormal(d, d_block * 2 + d_inv, rng);
    const Matrix f_prime = q.cols_range(0, d_block);
    const Matrix g_prime = q.cols_range(d_block, d_block);
    const Matrix in_block = q.cols_range(2 * d_block, d_inv);

    const Matrix coef = random_matrix(outputs, d_inv, rng);
    if (w_star_out != nullptr) *w_star_out = matmul_nt(coef, in_block);

    const Matrix mix = random_matrix(d_block, d_inv, rng);
    Matrix x_id(n, d), x_ood(n, d);
    for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> z_in(d_inv), z_env(d_block);
        for (double& z : z_in) z = rng.normal();
        for (std::size_t j = 0; j < d_block; ++j) {
            double v = 0.0;
            for (std::size_t c = 0; c < d_inv; ++c) v += 0.5 * mix(j, c) * z_in[c];
            z_env[j] = v + 0.3 * rng.normal();
        }
        // the OOD row reuses the exact coordinate draws in its own block
        for (std::size_t i = 0; i < d; ++i) {
            double xi = 0.0, xo = 0.0;
            for (std::size_t j = 0; j < d_block; ++j) {
                xi += f_prime(i, j) * z_env[j];
                xo += g_prime(i, j) * z_env[j];
            }
            for (std::size_t c = 0; c < d_inv; ++c) {
                xi += in_block(i, c) * z_in[c];
                xo += in_block(i, c) * z_in[c];
            }
            x_id(k, i) = xi;
            x_ood(k, i) = xo;
        }
    }

    subspace::DomainSpec spec;
    spec.x_id = std::move(x_id);
    spec.x_ood = identical_domains ? spec.x_id : std::move(x_ood);
    spec.p_i = p_i;
    spec.p_o = 1.0 - p_i;
    return spec;
}

PropertyReport check_eq4_identity(std::size_t seeds) {
    PropertyReport report;
    report.name = "eq4_identity";
    report.seeds = seeds;
    double worst = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(0xE4000 + s);
        const std::size_t m = 2 + rng.uniform_index(4);             // 2..5
        const std::size_t dim_s = 1 + rng.uniform_index(m);         // 1..m
        const std::size_t dim_u = 1 + rng.uniform_index(m);         // 1..m
        const double p_i = rng.uniform(0.55, 0.95);
        const AlignedInstance inst =
            make_aligned_instance(m, dim_s, dim_u, p_i, 0xA11CE + s, true);
        const ProjectionDecomposition decomp = subspace::projection_spectrum(inst.bases);
        const Matrix lin = subspace::linear_gradient(inst.coords, decomp, inst.spec);
        const Matrix oracle = subspace::mixture_gradient(inst.w_t, inst.spec, inst.w_star);
        worst = std::max(worst, relative_error(lin, oracle, 1e-12));
    }
    report.measured = worst;
    report.predicted = 1e-6;
    report.passed = worst <= 1e-6;
    std::ostringstream details;
    details << "max relative error " << worst << " over " << seeds << " aligned instances";
    report.details = details.str();
    return report;
}

PropertyReport check_prop2(std::size_t seeds) {
    PropertyReport report;
    report.name = "prop2_directional_gap";
    report.seeds = seeds;

    // sign agreement on random instances with orthogonal feature blocks
    std::size_t agree = 0;
    const double delta = 1e-6;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(0x9209 + s * 7919);
        const std::size_t d = 8, m = 3, dim_s = 2, dim_u = 2;
        SubspaceBases bases;
        bases.e = random_orthonormal(d, m, rng);
        const Matrix fg = random_orthonormal(d, dim_s + dim_u, rng);
        bases.f = fg.cols_range(0, dim_s);
        bases.g = fg.cols_range(dim_s, dim_u);

        DomainSpec spec;
        spec.x_id = bases.f.transposed();
        spec.x_ood = bases.g.transposed();
        spec.p_i = rng.uniform(0.6, 0.9);
        spec.p_o = 1.0 - spec.p_i;
        bases.z = Matrix::identity(dim_s);
        bases.v = Matrix::identity(dim_u);

        const ProjectionDecomposition decomp = subspace::projection_spectrum(bases);
        const double predicted = subspace::directional_gap(decomp, spec);

        const Matrix a = random_matrix(dim_s, m, rng);
        const Matrix b = random_matrix(dim_u, m, rng);
        const Matrix w_star(m, d);
        const Matrix w = assemble_weights(bases, a, b, spec.p_i, spec.p_o);
        const Matrix g0 = subspace::mixture_gradient(w, spec, w_star);

        auto perturbed_speed = [&](bool along_id) {
            Matrix a2 = a, b2 = b;
            const Matrix& dir = along_id ? decomp.lambda : decomp.gamma;
            Matrix& target = along_id ? a2 : b2;
            for (std::size_t i = 0; i < target.rows(); ++i) target(i, 0) += delta * dir(i, 0);
            const Matrix w2 = assemble_weights(bases, a2, b2, spec.p_i, spec.p_o);
            return frobenius_distance(subspace::mixture_gradient(w2, spec, w_star), g0) / delta;
        };
        const double measured = perturbed_speed(true) - perturbed_speed(false);
        if ((measured >= 0) == (predicted >= 0)) ++agree;
    }

    // magnitude on aligned single-pair instances (disjoint axes, unit
    // sample counts: the closed form is exact there)
    double worst_rel = 0.0;
    const std::size_t magnitude_trials = 20;
    for (std::size_t s = 0; s < magnitude_trials; ++s) {
        Rng rng(0xBEE5 + s);
        const double p_i = rng.uniform(0.6, 0.9);
        const AlignedInstance inst = make_aligned_instance(2, 1, 1, p_i, 0xFACE + s, false);
        const ProjectionDecomposition decomp = subspace::projection_spectrum(inst.bases);
        const double predicted = subspace::directional_gap(decomp, inst.spec);

        const Matrix w_star(2, inst.spec.x_id.cols());
        const Matrix g0 = subspace::mixture_gradient(inst.w_t, inst.spec, w_star);
        auto speed = [&](bool along_id) {
            ModelCoordinates c = inst.coords;
            (along_id ? c.a : c.b)(0, 0) += delta;
            const Matrix w2 = assemble_weights(inst.bases, c.a, c.b, inst.spec.p_i, inst.spec.p_o);
            return frobenius_distance(subspace::mixture_gradient(w2, inst.spec, w_star), g0) /
                   delta;
        };
        const double measured = speed(true) - speed(false);
        worst_rel = std::max(worst_rel, std::fabs(measured - predicted) /
                                            std::max(std::fabs(predicted), 1e-12));
    }

    const std::size_t required = (seeds * 95 + 99) / 100;
    report.measured = static_cast<double>(agree);
    report.predicted = static_cast<double>(required);
    report.passed = agree >= required && worst_rel <= 0.2;
    std::ostringstream details;
    details << "sign agreement " << agree << "/" << seeds << " (need " << required
            << "), aligned magnitude max rel err " << worst_rel << " (cap 0.2)";
    report.details = details.str();
    return report;
}

PropertyReport check_prop3() {
    PropertyReport report;
    report.name = "prop3_loss_gap";
    const std::vector<double> grid = {0.5, 0.6, 0.7, 0.8, 0.9};
    const double lr = 0.02;
    const std::size_t steps = 600;
    const std::uint64_t seed = 0x9703;

    std::vector<double> gaps;
    double eps_half = 0.0, gap_half = 0.0;
    for (double p_i : grid) {
        Matrix w_star;
        DomainSpec spec = make_mirrored_spec(p_i, seed, false, &w_star);
        const Matrix w0(w_star.rows(), w_star.cols());
        const subspace::SimulationResult sim =
            subspace::simulate_undirected_training(spec, w0, w_star, lr, steps);
        const double eps = sim.steps.front().loss_ood - sim.steps.front().loss_id;
        const double gap = sim.steps.back().loss_ood - sim.steps.back().loss_id;
        gaps.push_back(gap);
        if (p_i == 0.5) {
            eps_half = eps;
            gap_half = gap;
        }
    }

    bool monotone = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        if (!(gaps[i] > gaps[i - 1])) monotone = false;
    }
    bool non_negative = true;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        if (gaps[i] < 0.0) non_negative = false;
    }
    const bool half_ok = std::fabs(gap_half - eps_half) <= 1e-6;

    // sigma_fg = 1: identical domains at a biased proportion
    Matrix w_star_same;
    DomainSpec same = make_mirrored_spec(0.8, seed, true, &w_star_same);
    const Matrix w0(w_star_same.rows(), w_star_same.cols());
    const subspace::SimulationResult sim_same =
        subspace::simulate_undirected_training(same, w0, w_star_same, lr, steps);
    const double eps_same = sim_same.steps.front().loss_ood - sim_same.steps.front().loss_id;
    const double gap_same = sim_same.steps.back().loss_ood - sim_same.steps.back().loss_id;
    const bool same_ok = gap_same <= eps_same + 1e-6;

    report.seeds = grid.size() + 1;
    report.measured = gaps.back();
    report.predicted = 0.0;
    report.passed = monotone && non_negative && half_ok && same_ok;
    std::ostringstream details;
    details << "gaps(p_i=0.5..0.9) =";
    for (double g : gaps) details << " " << g;
    details << "; spearman " << (monotone ? 1.0 : 0.0) << "; |gap-eps|@0.5 "
            << std::fabs(gap_half - eps_half) << "; gap@sigma1 " << gap_same;
    report.details = details.str();
    return report;
}

PropertyReport check_lemma1(std::size_t seeds) {
    PropertyReport report;
    report.name = "lemma1_response_ratio";
    report.seeds = seeds;
    double min_ratio = 1e300;
    double worst_full = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        Rng rng(0x11AA + s * 131);
        const std::size_t m = 2 + rng.uniform_index(5);      // 2..6
        const std::size_t dim_s = 1 + rng.uniform_index(6);  // 1..6
        const std::size_t dim_u = 1 + rng.uniform_index(6);
        const std::size_t d = m + dim_s + dim_u + rng.uniform_index(4);
        SubspaceBases bases;
        bases.e = random_orthonormal(d, m, rng);
        bases.f = random_orthonormal(d, dim_s, rng);
        bases.g = random_orthonormal(d, dim_u, rng);
        bases.z = Matrix::identity(dim_s);
        bases.v = Matrix::identity(dim_u);
        DomainSpec spec;
        spec.x_id = bases.f.transposed();
        spec.x_ood = bases.g.transposed();
        spec.p_i = rng.uniform(0.55, 0.95);
        spec.p_o = 1.0 - spec.p_i;

        const ProjectionDecomposition decomp = subspace::projection_spectrum(bases);
        for (std::size_t theta = 1; theta < m; ++theta) {
            min_ratio = std::min(min_ratio,
                                 subspace::response_deviation_ratio(decomp, spec, theta));
        }
        worst_full = std::max(
            worst_full, std::fabs(subspace::response_deviation_ratio(decomp, spec, m) - 1.0));
    }
    report.measured = min_ratio;
    report.predicted = 1.0 - 1e-9;
    report.passed = min_ratio >= 1.0 - 1e-9 && worst_full <= 1e-9;
    std::ostringstream details;
    details << "min ratio " << min_ratio << " over " << seeds
            << " instances (all theta < m); |ratio-1| at theta=m " << worst_full;
    report.details = details.str();
    return report;
}

PropertyReport check_lemma2(std::size_t seeds) {
    PropertyReport report;
    report.name = "lemma2_eta_bound";
    report.seeds = seeds;
    std::size_t successes = 0;
    double worst_invariant_drop = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const PairedRuns runs = run_paired(2000 + s);
        const Matrix& f_prime = runs.bundle.task.f_prime;
        const Matrix& in_block = runs.bundle.task.in_block;
        const double sp_erm = block_response(runs.erm.model.w, f_prime);
        const double sp_sfp = block_response(runs.sfp.model.w, f_prime);
        const double in_erm = block_response(runs.erm.model.w, in_block);
        const double in_sfp = block_response(runs.sfp.model.w, in_block);
        const bool ok = sp_sfp < sp_erm && in_sfp >= in_erm - 1e-3;
        if (ok) ++successes;
        worst_invariant_drop = std::max(worst_invariant_drop, in_erm - in_sfp);
    }
    const std::size_t required = (seeds * 9 + 9) / 10;
    report.measured = static_cast<double>(successes);
    report.predicted = static_cast<double>(required);
    report.passed = successes >= required;
    std::ostringstream details;
    details << successes << "/" << seeds
            << " paired runs reduce the spurious response while keeping the invariant response"
            << " (worst invariant drop " << worst_invariant_drop << ")";
    report.details = details.str();
    return report;
}

PropertyReport check_fig3(std::size_t seeds) {
    PropertyReport report;
    report.name = "fig3_loss_tracking";
    report.seeds = seeds;
    std::size_t ordered_seeds = 0, shrunk = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const PairedRuns runs = run_paired(3000 + s);
        bool ordered = true;
        for (const auto& rec : runs.erm.trace) {
            if (!(rec.loss_id < rec.loss_ood)) ordered = false;
        }
        if (ordered) ++ordered_seeds;
        const auto& erm_last = runs.erm.trace.back();
        const auto& sfp_last = runs.sfp.trace.back();
        if (std::fabs(sfp_last.loss_id - sfp_last.loss_ood) <=
            std::fabs(erm_last.loss_id - erm_last.loss_ood)) {
            ++shrunk;
        }
    }
    const std::size_t required = (seeds * 9 + 9) / 10;
    report.measured = static_cast<double>(shrunk);
    report.predicted = static_cast<double>(required);
    report.passed = ordered_seeds == seeds && shrunk >= required;
    std::ostringstream details;
    details << "ID loss below OOD loss every epoch in " << ordered_seeds << "/" << seeds
            << " seeds; final gap shrunk in " << shrunk << "/" << seeds << " (need " << required
            << ")";
    report.details = details.str();
    return report;
}

std::vector<PropertyReport> run_checks(const std::vector<std::string>& only,
                                       std::size_t seeds) {
    auto wanted = [&](const std::string& name) {
        if (only.empty()) return true;
        for (const auto& o : only) {
            if (name.find(o) != std::string::npos) return true;
        }
        return false;
    };
    const std::size_t paired_seeds = std::max<std::size_t>(20, seeds / 5);
    std::vector<PropertyReport> reports;
    if (wanted("eq4_identity")) reports.push_back(check_eq4_identity(seeds));
    if (wanted("prop2_directional_gap")) reports.push_back(check_prop2(seeds));
    if (wanted("prop3_loss_gap")) reports.push_back(check_prop3());
    if (wanted("lemma1_response_ratio")) reports.push_back(check_lemma1(seeds));
    if (wanted("lemma2_eta_bound")) reports.push_back(check_lemma2(paired_seeds));
    if (wanted("fig3_loss_tracking")) reports.push_back(check_fig3(paired_seeds));
    return reports;
}

}  // namespace sfp::verify
