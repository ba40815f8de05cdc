#ifndef SFP_SUBSPACE_HPP
#define SFP_SUBSPACE_HPP

#include <cstddef>
#include <functional>
#include <vector>

#include "sfp/matrix.hpp"
#include "sfp/svd.hpp"

namespace sfp::subspace {

/// A two-domain training world: in-distribution rows x_id (p x d),
/// out-of-distribution rows x_ood (q x d), and the declared mixture
/// proportions. The proportions are explicit coefficients, deliberately
/// decoupled from the row counts, so symmetric-population checks
/// (p_i == p_o) can run on any sample sizes.
struct DomainSpec {
    Matrix x_id;
    Matrix x_ood;
    double p_i = 0.5;
    double p_o = 0.5;
};

/// Throws InvalidInput unless proportions sum to one (1e-12) and both
/// datasets are non-empty with one shared column dimension.
void validate(const DomainSpec& spec);

/// Orthonormal bases for the three row spaces in play: E for the model
/// weights, F for the ID data, G for the OOD data, plus the coordinate
/// sets Z, V with X_id = (F Z)^T and X_ood = (G V)^T.
struct SubspaceBases {
    Matrix e;  // d x dim(R)
    Matrix f;  // d x dim(S)
    Matrix g;  // d x dim(U)
    Matrix z;  // dim(S) x p
    Matrix v;  // dim(U) x q
};

/// Singular structure of the feature projections. xi/lambda are the left
/// and right singular vectors of E^T F; gamma holds the right singular
/// vectors of E^T G (its left factor is identified with xi, which is exact
/// on aligned constructions and the working approximation elsewhere).
/// sigma_fg is the spectrum of F^T G, i.e. the principal-angle cosines
/// between the two data subspaces.
struct ProjectionDecomposition {
    std::vector<double> sigma_ef;
    std::vector<double> sigma_eg;
    std::vector<double> sigma_fg;
    Matrix xi;      // dim(R) x k_f
    Matrix lambda;  // dim(S) x k_f
    Matrix gamma;   // dim(U) x k_g
};

/// Model-weight coordinates in the projection frames. `a` stacks one
/// dim(S)-coordinate column per model feature row (so a is dim(S) x m),
/// likewise `b` on the OOD side; starred members are the optimum.
/// r = p_i*Sigma_ef*a + p_o*Sigma_eg*b is the combined coordinate set in
/// the model frame.
struct ModelCoordinates {
    Matrix a;
    Matrix a_star;
    Matrix b;
    Matrix b_star;
    Matrix r;
};

/// One simulated descent step: losses measured before the update.
struct SimStep {
    double loss_id = 0.0;
    double loss_ood = 0.0;
};

struct SimulationResult {
    std::vector<SimStep> steps;  // steps.size() == step count + 1 (final state included)
    Matrix final_w;
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// Derives orthonormal bases for the model/ID/OOD row spaces and the data
/// coordinates in them. Throws ZeroMatrix if any input is all-zero.
SubspaceBases build_bases(const Matrix& w, const DomainSpec& spec);

/// SVDs of E^T F, E^T G and F^T G.
ProjectionDecomposition projection_spectrum(const SubspaceBases& b);

/// Mean-over-samples squared error ||X W_t^T - X W*^T||_F^2 / rows(X).
double task_loss(const Matrix& w_t, const Matrix& x, const Matrix& w_star);

/// Exact gradient of task_loss with respect to W_t:
/// (2/n) (W_t - W*) X^T X.
Matrix brute_gradient(const Matrix& w_t, const Matrix& x, const Matrix& w_star);

/// p_i-weighted two-domain loss and gradient; the objective the
/// simulation descends.
double mixture_loss(const Matrix& w_t, const DomainSpec& spec, const Matrix& w_star);
Matrix mixture_gradient(const Matrix& w_t, const DomainSpec& spec, const Matrix& w_star);

/// Closed-form gradient assembled from coordinates and spectra alone:
///   2 { p_i^2 a~^T S_ef^2 Xbar_id + p_o^2 b~^T S_eg^2 Xbar_ood
///       + p_i p_o (a~^T S_fe S_eg Xbar_ood + b~^T S_ge S_ef Xbar_id) }
/// with Xbar the row-mean-normalized datasets. Requires rows(x_id) ==
/// rows(a) and rows(x_ood) == rows(b) (the datasets play the role of the
/// basis frames); equals mixture_gradient exactly on aligned
/// constructions.
Matrix linear_gradient(const ModelCoordinates& coords,
                       const ProjectionDecomposition& decomp,
                       const DomainSpec& spec);

/// r = p_i*Sigma_ef*a + p_o*Sigma_eg*b in the model frame (dim_r rows).
Matrix combined_coordinates(const Matrix& a, const Matrix& b,
                            const ProjectionDecomposition& decomp,
                            const DomainSpec& spec, std::size_t dim_r);

/// Plain gradient descent on mixture_loss. Records losses at every step
/// (including the final state, so steps.size() == steps+1). Throws
/// Diverged (with the failing step index) when a loss stops being finite.
SimulationResult simulate_undirected_training(const DomainSpec& spec, const Matrix& w0,
                                              const Matrix& w_star, double lr,
                                              std::size_t steps);

/// As above with a per-step observer (called with t and W_t before the
/// update); used by consistency checks that need the intermediate weights.
SimulationResult simulate_undirected_training(
    const DomainSpec& spec, const Matrix& w0, const Matrix& w_star, double lr,
    std::size_t steps, const std::function<void(std::size_t, const Matrix&)>& observer);

/// Predicted learning-speed difference along the ID vs OOD coordinate
/// directions, using the leading singular values:
/// 2 (p_i^2 sigma_ef_max^2 - p_o^2 sigma_eg_max^2).
double directional_gap(const ProjectionDecomposition& decomp, const DomainSpec& spec);

/// Predicted converged loss gap (p_i^2 - p_o^2)(1 - sigma_fg_max) + epsilon.
double loss_gap_prediction(const DomainSpec& spec, double sigma_fg_max, double epsilon);

/// Combined projection object [P_id | P_ood] (dim(R) x (dim(S)+dim(U))):
/// P_id = p_i * sum_i sigma_i xi_i lambda_i^T, P_ood the same with the
/// OOD spectrum and gamma. The two blocks address the ID and OOD
/// coordinate frames respectively.
Matrix projection_space(const ProjectionDecomposition& decomp, const DomainSpec& spec);

/// projection_space with the ID block truncated to its top `theta`
/// singular triples; the OOD block stays at full rank.
Matrix sparse_projection(const ProjectionDecomposition& decomp, const DomainSpec& spec,
                         std::size_t theta);

/// Response of a projection object to data given in the stacked [F|G]
/// coordinate frame (x_coords: n x (dim(S)+dim(U))): projection * x_coords^T.
Matrix model_response(const Matrix& projection, const Matrix& x_coords);

/// Stacks the coordinates of raw data rows in the two frames: [x F | x G].
Matrix feature_coordinates(const SubspaceBases& bases, const Matrix& x);

/// |R(OOD) - R(ID)| / |R_sparse(OOD) - R_sparse(ID)| on the canonical
/// (basis-unit) data, reduced to scalars by the Frobenius norm of the
/// response-difference blocks. >= 1 for every valid theta; exactly 1 at
/// theta >= the ID spectrum length. Throws DegenerateDenominator when the
/// sparse difference vanishes.
double response_deviation_ratio(const ProjectionDecomposition& decomp,
                                const DomainSpec& spec, std::size_t theta);

}  // namespace sfp::subspace

#endif  // SFP_SUBSPACE_HPP
