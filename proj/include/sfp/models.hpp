#ifndef SFP_MODELS_HPP
#define SFP_MODELS_HPP

#include <cstdint>
#include <vector>

#include "sfp/matrix.hpp"

namespace sfp::models {

enum class ModelKind { Linear, Mlp };

struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    std::size_t input_dim = 1;    // d
    std::size_t feature_dim = 1;  // m
    std::size_t classes = 1;      // C, mlp only
};

/// Trainable parameters. The linear model is just the feature map W; the
/// mlp adds a rectified hidden layer and a classifier head.
struct ModelState {
    ModelSpec spec;
    Matrix w;                 // m x d
    std::vector<double> b1;   // m (mlp)
    Matrix head;              // C x m (mlp)
    std::vector<double> b2;   // C (mlp)
    long step = 0;
};

/// Per-parameter gradients, shapes mirroring ModelState, plus the
/// per-sample task losses of the batch they came from (penalty excluded:
/// those losses feed identification).
struct BatchGradients {
    Matrix w;
    std::vector<double> b1;
    Matrix head;
    std::vector<double> b2;
    std::vector<double> per_sample_losses;
};

struct ForwardPass {
    Matrix pre;       // mlp pre-activation, empty for linear
    Matrix features;  // n x m, f(x)
    Matrix outputs;   // n x m (linear) or n x C (mlp logits)
};

/// Scaled-uniform init (+-sqrt(6/(fan_in+fan_out))), biases zero.
/// Deterministic per seed.
ModelState init_model(const ModelSpec& spec, std::uint64_t seed);

ForwardPass forward(const ModelState& state, const Matrix& batch);

/// Softmax rows of logits.
Matrix softmax_rows(const Matrix& logits);

std::vector<double> per_sample_squared_losses(const Matrix& outputs, const Matrix& targets);
std::vector<double> per_sample_ce_losses(const Matrix& probs, const std::vector<int>& labels);

/// Core backward pass: `dout` is the gradient of the training objective
/// with respect to `outputs` (the env-aware trainers supply reweighted
/// versions). The feature-sparsity penalty eta * mean over masked samples
/// of mean |f(x)| is added internally; an empty mask or eta == 0 leaves
/// the gradients bit-identical to the plain task objective.
BatchGradients backward(const ModelState& state, const Matrix& batch, const ForwardPass& fwd,
                        const Matrix& dout, const std::vector<std::uint8_t>& penalty_mask,
                        double eta);

/// Mean squared error objective (linear/regression). Throws
/// NumericalFailure when the total loss is not finite.
BatchGradients loss_and_grads(const ModelState& state, const Matrix& batch,
                              const Matrix& targets,
                              const std::vector<std::uint8_t>& penalty_mask, double eta);

/// Softmax cross-entropy objective (mlp/classification).
BatchGradients loss_and_grads(const ModelState& state, const Matrix& batch,
                              const std::vector<int>& labels,
                              const std::vector<std::uint8_t>& penalty_mask, double eta);

/// Plain descent update; increments the step counter.
ModelState sgd_step(const ModelState& state, const BatchGradients& grads, double lr);

}  // namespace sfp::models

#endif  // SFP_MODELS_HPP
