#include "sfp/models.hpp"

#include <algorithm>
#include <cmath>

#include "sfp/errors.hpp"
#include "sfp/rng.hpp"

namespace sfp::models {

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
}

void check_batch(const ModelState& state, const Matrix& batch) {
    if (batch.cols() != state.spec.input_dim) {
        throw Error(ErrorCode::InvalidInput, "batch feature dimension does not match model");
    }
}

}  // namespace

ModelState init_model(const ModelSpec& spec, std::uint64_t seed) {
    if (spec.input_dim < 1 || spec.feature_dim < 1 || spec.classes < 1) {
        throw Error(ErrorCode::InvalidInput, "model dimensions must be >= 1");
    }
    Rng rng(seed);
    ModelState state;
    state.spec = spec;
    state.w = glorot_uniform(spec.feature_dim, spec.input_dim, rng);
    if (spec.kind == ModelKind::Mlp) {
        state.b1.assign(spec.feature_dim, 0.0);
        state.head = glorot_uniform(spec.classes, spec.feature_dim, rng);
        state.b2.assign(spec.classes, 0.0);
    }
    return state;
}

ForwardPass forward(const ModelState& state, const Matrix& batch) {
    check_batch(state, batch);
    ForwardPass fwd;
    if (state.spec.kind == ModelKind::Linear) {
        fwd.features = matmul_nt(batch, state.w);
        fwd.outputs = fwd.features;
        return fwd;
    }
    fwd.pre = matmul_nt(batch, state.w);
    for (std::size_t i = 0; i < fwd.pre.rows(); ++i) {
        for (std::size_t j = 0; j < fwd.pre.cols(); ++j) fwd.pre(i, j) += state.b1[j];
    }
    fwd.features = fwd.pre;
    for (std::size_t i = 0; i < fwd.features.size(); ++i) {
        fwd.features.data()[i] = std::max(0.0, fwd.features.data()[i]);
    }
    fwd.outputs = matmul_nt(fwd.features, state.head);
    for (std::size_t i = 0; i < fwd.outputs.rows(); ++i) {
        for (std::size_t j = 0; j < fwd.outputs.cols(); ++j) fwd.outputs(i, j) += state.b2[j];
    }
    return fwd;
}

Matrix softmax_rows(const Matrix& logits) {
    Matrix probs(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* row = logits.row_ptr(i);
        double mx = row[0];
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        double* prow = probs.row_ptr(i);
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            prow[j] = std::exp(row[j] - mx);
            sum += prow[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) prow[j] /= sum;
    }
    return probs;
}

std::vector<double> per_sample_squared_losses(const Matrix& outputs, const Matrix& targets) {
    if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
        throw Error(ErrorCode::InvalidInput, "output/target shape mismatch");
    }
    std::vector<double> losses(outputs.rows(), 0.0);
    for (std::size_t i = 0; i < outputs.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < outputs.cols(); ++j) {
            const double d = outputs(i, j) - targets(i, j);
            sum += d * d;
        }
        losses[i] = sum;
    }
    return losses;
}

std::vector<double> per_sample_ce_losses(const Matrix& probs, const std::vector<int>& labels) {
    if (probs.rows() != labels.size()) {
        throw Error(ErrorCode::InvalidInput, "probs/label count mismatch");
    }
    std::vector<double> losses(probs.rows(), 0.0);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const int y = labels[i];
        if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
            throw Error(ErrorCode::InvalidInput, "label out of range");
        }
        losses[i] = -std::log(std::max(probs(i, static_cast<std::size_t>(y)), 1e-300));
    }
    return losses;
}

BatchGradients backward(const ModelState& state, const Matrix& batch, const ForwardPass& fwd,
                        const Matrix& dout, const std::vector<std::uint8_t>& penalty_mask,
                        double eta) {
    check_batch(state, batch);
    if (!penalty_mask.empty() && penalty_mask.size() != batch.rows()) {
        throw Error(ErrorCode::InvalidInput, "penalty mask length does not match batch");
    }

    std::size_t masked = 0;
    for (std::uint8_t flag : penalty_mask) masked += flag ? 1 : 0;
    const bool penalize = eta != 0.0 && masked > 0;
    const double pen_scale =
        penalize ? eta / (static_cast<double>(masked) * static_cast<double>(state.spec.feature_dim))
                 : 0.0;

    BatchGradients grads;
    if (state.spec.kind == ModelKind::Linear) {
        // features == outputs; objective gradient on features is dout plus
        // the penalty subgradient sign(f) on masked rows
        Matrix dfeat = dout;
        if (penalize) {
            for (std::size_t i = 0; i < batch.rows(); ++i) {
                if (!penalty_mask[i]) continue;
                for (std::size_t j = 0; j < dfeat.cols(); ++j) {
                    const double f = fwd.features(i, j);
                    if (f > 0.0) dfeat(i, j) += pen_scale;
                    else if (f < 0.0) dfeat(i, j) -= pen_scale;
                }
            }
        }
        grads.w = matmul_tn(dfeat, batch);
        return grads;
    }

    // mlp: dout -> head, then back through relu (+ penalty) to w
    grads.head = matmul_tn(dout, fwd.features);
    grads.b2.assign(state.spec.classes, 0.0);
    for (std::size_t i = 0; i < dout.rows(); ++i) {
        for (std::size_t j = 0; j < dout.cols(); ++j) grads.b2[j] += dout(i, j);
    }

    Matrix dfeat = matmul(dout, state.head);
    if (penalize) {
        // post-rectifier features are non-negative: |f| = f
        for (std::size_t i = 0; i < batch.rows(); ++i) {
            if (!penalty_mask[i]) continue;
            for (std::size_t j = 0; j < dfeat.cols(); ++j) dfeat(i, j) += pen_scale;
        }
    }
    for (std::size_t i = 0; i < dfeat.rows(); ++i) {
        for (std::size_t j = 0; j < dfeat.cols(); ++j) {
            if (fwd.pre(i, j) <= 0.0) dfeat(i, j) = 0.0;
        }
    }
    grads.w = matmul_tn(dfeat, batch);
    grads.b1.assign(state.spec.feature_dim, 0.0);
    for (std::size_t i = 0; i < dfeat.rows(); ++i) {
        for (std::size_t j = 0; j < dfeat.cols(); ++j) grads.b1[j] += dfeat(i, j);
    }
    return grads;
}

BatchGradients loss_and_grads(const ModelState& state, const Matrix& batch,
                              const Matrix& targets,
                              const std::vector<std::uint8_t>& penalty_mask, double eta) {
    if (eta < 0.0) throw Error(ErrorCode::InvalidInput, "eta must be >= 0");
    const ForwardPass fwd = forward(state, batch);
    const std::vector<double> losses = per_sample_squared_losses(fwd.outputs, targets);

    const double n = static_cast<double>(batch.rows());
    Matrix dout = fwd.outputs;
    dout -= targets;
    dout *= 2.0 / n;

    BatchGradients grads = backward(state, batch, fwd, dout, penalty_mask, eta);
    grads.per_sample_losses = losses;

    double total = 0.0;
    for (double l : losses) total += l;
    if (!std::isfinite(total)) {
        throw Error(ErrorCode::NumericalFailure, "non-finite loss");
    }
    return grads;
}

BatchGradients loss_and_grads(const ModelState& state, const Matrix& batch,
                              const std::vector<int>& labels,
                              const std::vector<std::uint8_t>& penalty_mask, double eta) {
    if (eta < 0.0) throw Error(ErrorCode::InvalidInput, "eta must be >= 0");
    const ForwardPass fwd = forward(state, batch);
    const Matrix probs = softmax_rows(fwd.outputs);
    const std::vector<double> losses = per_sample_ce_losses(probs, labels);

    const double n = static_cast<double>(batch.rows());
    Matrix dout = probs;
    for (std::size_t i = 0; i < batch.rows(); ++i) {
        dout(i, static_cast<std::size_t>(labels[i])) -= 1.0;
    }
    dout *= 1.0 / n;

    BatchGradients grads = backward(state, batch, fwd, dout, penalty_mask, eta);
    grads.per_sample_losses = losses;

    double total = 0.0;
    for (double l : losses) total += l;
    if (!std::isfinite(total)) {
        throw Error(ErrorCode::NumericalFailure, "non-finite loss");
    }
    return grads;
}

ModelState sgd_step(const ModelState& state, const BatchGradients& grads, double lr) {
    if (lr <= 0.0) throw Error(ErrorCode::InvalidInput, "learning rate must be positive");
    ModelState next = state;
    for (std::size_t i = 0; i < next.w.size(); ++i) {
        next.w.data()[i] -= lr * grads.w.data()[i];
    }
    if (state.spec.kind == ModelKind::Mlp) {
        for (std::size_t i = 0; i < next.b1.size(); ++i) next.b1[i] -= lr * grads.b1[i];
        for (std::size_t i = 0; i < next.head.size(); ++i) {
            next.head.data()[i] -= lr * grads.head.data()[i];
        }
        for (std::size_t i = 0; i < next.b2.size(); ++i) next.b2[i] -= lr * grads.b2[i];
    }
    next.step = state.step + 1;
    return next;
}

}  // namespace sfp::models
