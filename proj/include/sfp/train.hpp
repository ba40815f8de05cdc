#ifndef SFP_TRAIN_HPP
#define SFP_TRAIN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sfp/datasets.hpp"
#include "sfp/matrix.hpp"
#include "sfp/models.hpp"

namespace sfp::train {

enum class Method { Erm, Sfp, Irm, Rex, Dro, Mrm, SfpIrm, SfpRex, SfpDro };

Method method_from_string(const std::string& name);
std::string method_name(Method m);
bool method_uses_sfp(Method m);

enum class IdentMode { Textual, Algorithm1 };
enum class EtaMode { TwoSqrtLoss, Fixed };

/// Running loss statistics for one pass plus the mean of the previous
/// pass, which is what identification thresholds against.
struct LossStats {
    double mean = 0.0;
    double max = 0.0;
    double min = 0.0;
    double prev_mean = 0.0;
    bool has_prev = false;

    double sum = 0.0;
    std::size_t count = 0;

    void accumulate(const std::vector<double>& losses);
    /// Current pass becomes the previous one; counters reset.
    LossStats rolled() const;
};

struct SfpConfig {
    double p_i = 0.8;
    double p_o = 0.2;
    double lr = 0.05;
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double tau = 0.95;
    IdentMode ident_mode = IdentMode::Textual;
    EtaMode eta_mode = EtaMode::TwoSqrtLoss;
    double eta_fixed = 0.0;
    std::uint64_t seed = 1;
    std::size_t feature_dim = 256;  // mlp hidden width
    double irm_weight = 10.0;
    double rex_weight = 10.0;
    double mrm_l1 = 1e-3;
    bool prune = true;  // run the truncated-SVD prune after SFP training
};

void validate(const SfpConfig& cfg);

struct EpochRecord {
    double loss_id = 0.0;
    double loss_ood = 0.0;
    double sigma_hat = 1.0;
    double delta = 0.0;
    double identified_frac = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

using TrainTrace = std::vector<EpochRecord>;

/// Feature-space truncation of a trained model: predictions project the
/// feature map onto the kept directions before the classifier.
struct SparseModel {
    models::ModelState base;
    Matrix kept_basis;  // m x theta, orthonormal columns
    std::size_t theta = 0;
};

/// Training environments pooled into one sample table with env tags.
struct PooledData {
    Matrix data;
    std::vector<int> labels;
    Matrix targets;  // empty for classification
    std::vector<std::uint8_t> id_mask;
    std::vector<int> env_tag;
    int n_envs = 0;
    int classes = 0;
    bool regression = false;
};

PooledData pool_environments(const std::vector<const datasets::Environment*>& envs);

struct EvalResult {
    double accuracy = 0.0;
    double mean_loss = 0.0;
};

struct TrainResult {
    models::ModelState model;
    std::optional<SparseModel> pruned;
    TrainTrace trace;
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// sigma_hat = clamp(1 - (L_max - L_min) / (p_i^2 - p_o^2), 0, 1).
/// Throws DegenerateProportions unless p_i > p_o.
double estimate_sigma(const LossStats& stats, double p_i, double p_o);

/// Delta = p_o (p_i - p_o) (1 - sigma).
double threshold_delta(double sigma, double p_i, double p_o);

/// Flags samples as spurious-dominated. Textual mode flags
/// loss <= prev_mean - delta; Algorithm1 mode flags loss - prev_mean < delta.
/// Returns all-false when no previous mean exists yet.
std::vector<std::uint8_t> identify_spurious(const std::vector<double>& per_sample_losses,
                                            std::optional<double> prev_mean, double delta,
                                            IdentMode mode);

/// Sparsity factor for an identified sample at a given loss level:
/// 2*sqrt(loss) in two_sqrt_loss mode, the configured constant otherwise.
double eta_value(double per_sample_loss, const SfpConfig& cfg);

struct EpochOutcome {
    models::ModelState model;
    LossStats stats;  // this epoch's stats with prev_mean already rolled
    EpochRecord record;
};

/// One full epoch of the SFP loop over deterministic seeded batches:
/// forward, running stats, sigma/Delta, identification against the carry
/// mean, penalty on identified samples, SGD. `carry` must have been
/// initialized by a penalty-free forward pass (see initial_loss_stats).
EpochOutcome sfp_epoch(const models::ModelState& model, const PooledData& data,
                       const SfpConfig& cfg, const LossStats& carry,
                       std::size_t epoch_index);

/// Penalty-free forward pass over the pooled data; seeds the carry mean.
LossStats initial_loss_stats(const models::ModelState& model, const PooledData& data);

/// Truncated-SVD prune of the feature space: decomposes the identified
/// feature rows, keeps enough directions for a `tau` energy fraction, and
/// projects predictions onto them. Needs at least feature_dim rows.
SparseModel prune_model(const models::ModelState& model, const Matrix& identified_features,
                        double tau);

/// Full training entry point. `test_env` (optional) feeds the per-epoch
/// test accuracy column.
TrainResult train(Method method, const SfpConfig& cfg,
                  const std::vector<const datasets::Environment*>& envs,
                  const datasets::Environment* test_env = nullptr);

EvalResult evaluate(const models::ModelState& model, const datasets::Environment& env);
EvalResult evaluate(const SparseModel& model, const datasets::Environment& env);

}  // namespace sfp::train

#endif  // SFP_TRAIN_HPP
