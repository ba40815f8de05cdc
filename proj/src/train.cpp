#include "sfp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sfp/errors.hpp"
#include "sfp/rng.hpp"
#include "sfp/svd.hpp"

namespace sfp::train {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct MrmState {
    Matrix logits;  // same shape as the feature weights
};

struct BatchView {
    Matrix data;
    std::vector<int> labels;
    Matrix targets;
    std::vector<std::uint8_t> id_mask;
    std::vector<int> env_tag;
};

BatchView gather(const PooledData& pooled, const std::vector<std::size_t>& order,
                 std::size_t first, std::size_t count) {
    BatchView b;
    b.data = Matrix(count, pooled.data.cols());
    b.labels.resize(count);
    b.id_mask.resize(count);
    b.env_tag.resize(count);
    if (!pooled.targets.empty()) b.targets = Matrix(count, pooled.targets.cols());
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t row = order[first + i];
        std::copy(pooled.data.row_ptr(row), pooled.data.row_ptr(row) + pooled.data.cols(),
                  b.data.row_ptr(i));
        b.labels[i] = pooled.labels[row];
        b.id_mask[i] = pooled.id_mask[row];
        b.env_tag[i] = pooled.env_tag[row];
        if (!pooled.targets.empty()) {
            std::copy(pooled.targets.row_ptr(row), pooled.targets.row_ptr(row) + pooled.targets.cols(),
                      b.targets.row_ptr(i));
        }
    }
    return b;
}

// dloss_i/dout_i without any batch scaling
Matrix raw_loss_grad(const PooledData& pooled, const BatchView& batch, const Matrix& outputs,
                     const Matrix& probs) {
    if (pooled.regression) {
        Matrix g = outputs;
        g -= batch.targets;
        g *= 2.0;
        return g;
    }
    Matrix g = probs;
    for (std::size_t i = 0; i < batch.labels.size(); ++i) {
        g(i, static_cast<std::size_t>(batch.labels[i])) -= 1.0;
    }
    return g;
}

struct EnvRisks {
    std::vector<std::size_t> counts;
    std::vector<double> risks;
    std::size_t present = 0;
    double mean_risk = 0.0;
};

EnvRisks env_risks(const BatchView& batch, const std::vector<double>& losses, int n_envs) {
    EnvRisks r;
    r.counts.assign(static_cast<std::size_t>(n_envs), 0);
    r.risks.assign(static_cast<std::size_t>(n_envs), 0.0);
    for (std::size_t i = 0; i < losses.size(); ++i) {
        const auto e = static_cast<std::size_t>(batch.env_tag[i]);
        r.counts[e] += 1;
        r.risks[e] += losses[i];
    }
    for (std::size_t e = 0; e < r.risks.size(); ++e) {
        if (r.counts[e] == 0) continue;
        r.risks[e] /= static_cast<double>(r.counts[e]);
        r.mean_risk += r.risks[e];
        r.present += 1;
    }
    if (r.present > 0) r.mean_risk /= static_cast<double>(r.present);
    return r;
}

// Builds the objective gradient with respect to the model outputs for the
// requested method. The combined SFP variants reuse their base method here;
// the feature penalty rides on top via the backward-pass mask.
Matrix build_dout(Method method, const SfpConfig& cfg, const PooledData& pooled,
                  const BatchView& batch, const Matrix& outputs, const Matrix& probs,
                  const std::vector<double>& losses) {
    const std::size_t n = losses.size();
    Matrix raw = raw_loss_grad(pooled, batch, outputs, probs);

    Method base = method;
    if (method == Method::SfpIrm) base = Method::Irm;
    if (method == Method::SfpRex) base = Method::Rex;
    if (method == Method::SfpDro) base = Method::Dro;
    if (method == Method::Sfp || method == Method::Mrm) base = Method::Erm;

    if (base == Method::Erm) {
        raw *= 1.0 / static_cast<double>(n);
        return raw;
    }

    const EnvRisks er = env_risks(batch, losses, pooled.n_envs);
    const double inv_e = er.present > 0 ? 1.0 / static_cast<double>(er.present) : 1.0;

    if (base == Method::Dro) {
        std::size_t worst = 0;
        double worst_risk = -1.0;
        for (std::size_t e = 0; e < er.risks.size(); ++e) {
            if (er.counts[e] > 0 && er.risks[e] > worst_risk) {
                worst_risk = er.risks[e];
                worst = e;
            }
        }
        Matrix dout(raw.rows(), raw.cols());
        const double scale = 1.0 / static_cast<double>(er.counts[worst]);
        for (std::size_t i = 0; i < n; ++i) {
            if (static_cast<std::size_t>(batch.env_tag[i]) != worst) continue;
            for (std::size_t j = 0; j < raw.cols(); ++j) dout(i, j) = scale * raw(i, j);
        }
        return dout;
    }

    // per-sample coefficients shared by the env-mean base risk
    std::vector<double> coeff(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto e = static_cast<std::size_t>(batch.env_tag[i]);
        double c = inv_e / static_cast<double>(er.counts[e]);
        if (base == Method::Rex) {
            // d/dR_e of (mean + w * variance) over the env risks
            c *= 1.0 + 2.0 * cfg.rex_weight * (er.risks[e] - er.mean_risk);
        }
        coeff[i] = c;
    }
    Matrix dout(raw.rows(), raw.cols());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < raw.cols(); ++j) dout(i, j) = coeff[i] * raw(i, j);
    }

    if (base == Method::Irm) {
        // gradient penalty on a dummy output scale: sum_e g_e^2 with
        // g_e = d/ds risk_e(s * outputs) at s = 1
        std::vector<double> g(er.risks.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = static_cast<std::size_t>(batch.env_tag[i]);
            double s = 0.0;
            if (pooled.regression) {
                for (std::size_t j = 0; j < outputs.cols(); ++j) {
                    s += 2.0 * (outputs(i, j) - batch.targets(i, j)) * outputs(i, j);
                }
            } else {
                for (std::size_t j = 0; j < outputs.cols(); ++j) {
                    const double py = probs(i, j) - (batch.labels[i] == static_cast<int>(j) ? 1.0 : 0.0);
                    s += py * outputs(i, j);
                }
            }
            g[e] += s;
        }
        for (std::size_t e = 0; e < g.size(); ++e) {
            if (er.counts[e] > 0) g[e] /= static_cast<double>(er.counts[e]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto e = static_cast<std::size_t>(batch.env_tag[i]);
            const double scale =
                cfg.irm_weight * inv_e * 2.0 * g[e] / static_cast<double>(er.counts[e]);
            if (pooled.regression) {
                for (std::size_t j = 0; j < outputs.cols(); ++j) {
                    dout(i, j) += scale * (2.0 * outputs(i, j) - batch.targets(i, j));
                }
            } else {
                // d g / d z_i = (p - y) + p .* z - (p . z) p
                double pz = 0.0;
                for (std::size_t j = 0; j < outputs.cols(); ++j) pz += probs(i, j) * outputs(i, j);
                for (std::size_t j = 0; j < outputs.cols(); ++j) {
                    const double py = probs(i, j) - (batch.labels[i] == static_cast<int>(j) ? 1.0 : 0.0);
                    dout(i, j) += scale * (py + probs(i, j) * outputs(i, j) - pz * probs(i, j));
                }
            }
        }
    }
    return dout;
}

struct EpochScratch {
    std::vector<std::vector<double>>* feature_collector = nullptr;
    MrmState* mrm = nullptr;
};

EpochOutcome run_epoch(Method method, const models::ModelState& model_in, const PooledData& pooled,
                       const SfpConfig& cfg, const LossStats& carry, std::size_t epoch_index,
                       const EpochScratch& scratch) {
    const std::size_t n = pooled.data.rows();
    const bool ident_enabled = cfg.p_i > cfg.p_o + 1e-15;
    const bool apply_penalty = method_uses_sfp(method);

    Rng rng(cfg.seed ^ (0xD1B54A32D192ED03ULL + epoch_index * 0x9E3779B97F4A7C15ULL));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    models::ModelState model = model_in;
    LossStats stats;
    stats.prev_mean = carry.has_prev ? (carry.count > 0 ? carry.mean : carry.prev_mean) : 0.0;
    stats.has_prev = carry.has_prev;
    const std::optional<double> prev_mean =
        carry.has_prev ? std::optional<double>(carry.count > 0 ? carry.mean : carry.prev_mean)
                       : std::nullopt;

    double loss_id_sum = 0.0, loss_ood_sum = 0.0;
    std::size_t id_count = 0, ood_count = 0, correct = 0, flagged = 0;
    double sigma_hat = 1.0, delta = 0.0;

    const std::size_t batch_size = std::min(cfg.batch_size, n);
    for (std::size_t first = 0; first < n; first += batch_size) {
        const std::size_t count = std::min(batch_size, n - first);
        const BatchView batch = gather(pooled, order, first, count);
        const std::size_t batch_index = first / batch_size;

        // MRM trains through a sampled binary mask on the feature weights
        Matrix mrm_mask;
        models::ModelState active = model;
        if (scratch.mrm != nullptr) {
            mrm_mask = Matrix(model.w.rows(), model.w.cols());
            for (std::size_t i = 0; i < mrm_mask.size(); ++i) {
                mrm_mask.data()[i] =
                    rng.uniform() < sigmoid(scratch.mrm->logits.data()[i]) ? 1.0 : 0.0;
                active.w.data()[i] = model.w.data()[i] * mrm_mask.data()[i];
            }
        }

        try {
            const models::ForwardPass fwd = models::forward(active, batch.data);
            Matrix probs;
            std::vector<double> losses;
            if (pooled.regression) {
                losses = models::per_sample_squared_losses(fwd.outputs, batch.targets);
            } else {
                probs = models::softmax_rows(fwd.outputs);
                losses = models::per_sample_ce_losses(probs, batch.labels);
            }
            double batch_total = 0.0;
            for (double l : losses) batch_total += l;
            if (!std::isfinite(batch_total)) {
                throw Error(ErrorCode::NumericalFailure, "non-finite batch loss");
            }

            stats.accumulate(losses);
            if (ident_enabled) {
                sigma_hat = estimate_sigma(stats, cfg.p_i, cfg.p_o);
                delta = threshold_delta(sigma_hat, cfg.p_i, cfg.p_o);
            }
            std::vector<std::uint8_t> mask =
                ident_enabled ? identify_spurious(losses, prev_mean, delta, cfg.ident_mode)
                              : std::vector<std::uint8_t>(count, 0);
            for (std::uint8_t f : mask) flagged += f ? 1 : 0;

            double eta = 0.0;
            if (apply_penalty) {
                if (cfg.eta_mode == EtaMode::Fixed) {
                    eta = cfg.eta_fixed;
                } else {
                    double sum = 0.0;
                    std::size_t k = 0;
                    for (std::size_t i = 0; i < count; ++i) {
                        if (mask[i]) {
                            sum += losses[i];
                            ++k;
                        }
                    }
                    eta = k > 0 ? eta_value(sum / static_cast<double>(k), cfg) : 0.0;
                }
            }
            static const std::vector<std::uint8_t> kEmptyMask;
            const Matrix dout = build_dout(method, cfg, pooled, batch, fwd.outputs, probs, losses);
            models::BatchGradients grads = models::backward(
                active, batch.data, fwd, dout, apply_penalty ? mask : kEmptyMask, eta);

            if (scratch.feature_collector != nullptr) {
                for (std::size_t i = 0; i < count; ++i) {
                    if (mask[i]) scratch.feature_collector->push_back(fwd.features.row_vec(i));
                }
            }

            if (scratch.mrm != nullptr) {
                // straight-through: weight grad passes through the mask,
                // logit grad through the weight magnitude
                Matrix& logits = scratch.mrm->logits;
                const double l1_scale = cfg.mrm_l1 / static_cast<double>(logits.size());
                for (std::size_t i = 0; i < logits.size(); ++i) {
                    const double sig = sigmoid(logits.data()[i]);
                    const double dsig = sig * (1.0 - sig);
                    const double g_eff = grads.w.data()[i];
                    const double gs = g_eff * model.w.data()[i] * dsig + l1_scale * dsig;
                    logits.data()[i] -= cfg.lr * gs;
                    grads.w.data()[i] = g_eff * mrm_mask.data()[i];
                }
            }

            model = models::sgd_step(model, grads, cfg.lr);

            for (std::size_t i = 0; i < count; ++i) {
                if (batch.id_mask[i]) {
                    loss_id_sum += losses[i];
                    ++id_count;
                } else {
                    loss_ood_sum += losses[i];
                    ++ood_count;
                }
                std::size_t argmax = 0;
                for (std::size_t j = 1; j < fwd.outputs.cols(); ++j) {
                    if (fwd.outputs(i, j) > fwd.outputs(i, argmax)) argmax = j;
                }
                if (static_cast<int>(argmax) == batch.labels[i]) ++correct;
            }
        } catch (const Error& e) {
            if (e.code() == ErrorCode::NumericalFailure && e.detail() < 0) {
                throw Error(ErrorCode::NumericalFailure, "aborted at batch",
                            static_cast<long>(batch_index));
            }
            throw;
        }
    }

    EpochOutcome out;
    out.model = std::move(model);
    out.stats = stats.rolled();
    out.record.loss_id = id_count > 0 ? loss_id_sum / static_cast<double>(id_count) : 0.0;
    out.record.loss_ood = ood_count > 0 ? loss_ood_sum / static_cast<double>(ood_count) : 0.0;
    out.record.sigma_hat = sigma_hat;
    out.record.delta = delta;
    out.record.identified_frac = static_cast<double>(flagged) / static_cast<double>(n);
    out.record.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    return out;
}

EvalResult evaluate_impl(const models::ModelState& model, const Matrix* kept_basis,
                         std::size_t theta, const datasets::Environment& env) {
    const std::size_t n = env.size();
    if (n == 0) return {};
    const bool regression = !env.targets.empty();
    const bool project = kept_basis != nullptr && theta < model.spec.feature_dim;

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t chunk = 1024;
    for (std::size_t first = 0; first < n; first += chunk) {
        const std::size_t count = std::min(chunk, n - first);
        const Matrix block = env.data.rows_range(first, count);
        models::ForwardPass fwd = models::forward(model, block);
        Matrix outputs;
        if (project) {
            const Matrix coords = matmul(fwd.features, *kept_basis);   // n x theta
            const Matrix projected = matmul_nt(coords, *kept_basis);   // n x m
            if (model.spec.kind == models::ModelKind::Linear) {
                outputs = projected;
            } else {
                outputs = matmul_nt(projected, model.head);
                for (std::size_t i = 0; i < outputs.rows(); ++i) {
                    for (std::size_t j = 0; j < outputs.cols(); ++j) outputs(i, j) += model.b2[j];
                }
            }
        } else {
            outputs = std::move(fwd.outputs);
        }

        if (regression) {
            const Matrix targets = env.targets.rows_range(first, count);
            for (double l : models::per_sample_squared_losses(outputs, targets)) loss_sum += l;
        } else {
            const Matrix probs = models::softmax_rows(outputs);
            std::vector<int> labels(env.labels.begin() + static_cast<long>(first),
                                    env.labels.begin() + static_cast<long>(first + count));
            for (double l : models::per_sample_ce_losses(probs, labels)) loss_sum += l;
        }
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t argmax = 0;
            for (std::size_t j = 1; j < outputs.cols(); ++j) {
                if (outputs(i, j) > outputs(i, argmax)) argmax = j;
            }
            if (static_cast<int>(argmax) == env.labels[first + i]) ++correct;
        }
    }
    EvalResult r;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    r.mean_loss = loss_sum / static_cast<double>(n);
    return r;
}

}  // namespace

Method method_from_string(const std::string& name) {
    if (name == "erm") return Method::Erm;
    if (name == "sfp") return Method::Sfp;
    if (name == "irm") return Method::Irm;
    if (name == "rex") return Method::Rex;
    if (name == "dro") return Method::Dro;
    if (name == "mrm") return Method::Mrm;
    if (name == "sfp+irm") return Method::SfpIrm;
    if (name == "sfp+rex") return Method::SfpRex;
    if (name == "sfp+dro") return Method::SfpDro;
    throw Error(ErrorCode::InvalidInput, "unknown method: " + name);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Erm: return "erm";
        case Method::Sfp: return "sfp";
        case Method::Irm: return "irm";
        case Method::Rex: return "rex";
        case Method::Dro: return "dro";
        case Method::Mrm: return "mrm";
        case Method::SfpIrm: return "sfp+irm";
        case Method::SfpRex: return "sfp+rex";
        case Method::SfpDro: return "sfp+dro";
    }
    return "?";
}

bool method_uses_sfp(Method m) {
    return m == Method::Sfp || m == Method::SfpIrm || m == Method::SfpRex || m == Method::SfpDro;
}

void LossStats::accumulate(const std::vector<double>& losses) {
    for (double l : losses) {
        if (count == 0) {
            max = l;
            min = l;
        } else {
            max = std::max(max, l);
            min = std::min(min, l);
        }
        sum += l;
        ++count;
    }
    if (count > 0) mean = sum / static_cast<double>(count);
}

LossStats LossStats::rolled() const {
    LossStats next = *this;
    next.prev_mean = mean;
    next.has_prev = count > 0 || has_prev;
    return next;
}

void validate(const SfpConfig& cfg) {
    if (std::fabs(cfg.p_i + cfg.p_o - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidInput, "p_i + p_o must equal 1");
    }
    if (cfg.p_i < 0.0 || cfg.p_i > 1.0) {
        throw Error(ErrorCode::InvalidInput, "p_i outside [0, 1]");
    }
    if (cfg.tau <= 0.0 || cfg.tau > 1.0) {
        throw Error(ErrorCode::InvalidInput, "tau must lie in (0, 1]");
    }
    if (cfg.lr <= 0.0) throw Error(ErrorCode::InvalidInput, "lr must be positive");
    if (cfg.epochs < 1) throw Error(ErrorCode::InvalidInput, "epochs must be >= 1");
    if (cfg.batch_size < 1) throw Error(ErrorCode::InvalidInput, "batch size must be >= 1");
    if (cfg.eta_fixed < 0.0) throw Error(ErrorCode::InvalidInput, "eta must be >= 0");
}

PooledData pool_environments(const std::vector<const datasets::Environment*>& envs) {
    if (envs.empty()) throw Error(ErrorCode::InvalidInput, "no training environments");
    std::size_t n = 0;
    for (const auto* env : envs) {
        if (env == nullptr || env->size() == 0) {
            throw Error(ErrorCode::InvalidInput, "empty training environment");
        }
        if (env->data.cols() != envs.front()->data.cols() ||
            env->classes != envs.front()->classes ||
            env->targets.empty() != envs.front()->targets.empty()) {
            throw Error(ErrorCode::InvalidInput, "environments are not homogeneous");
        }
        n += env->size();
    }

    PooledData pooled;
    pooled.n_envs = static_cast<int>(envs.size());
    pooled.classes = envs.front()->classes;
    pooled.regression = !envs.front()->targets.empty();
    pooled.data = Matrix(n, envs.front()->data.cols());
    pooled.labels.resize(n);
    pooled.id_mask.resize(n);
    pooled.env_tag.resize(n);
    if (pooled.regression) pooled.targets = Matrix(n, envs.front()->targets.cols());

    std::size_t row = 0;
    for (std::size_t e = 0; e < envs.size(); ++e) {
        const datasets::Environment& env = *envs[e];
        for (std::size_t i = 0; i < env.size(); ++i, ++row) {
            std::copy(env.data.row_ptr(i), env.data.row_ptr(i) + env.data.cols(),
                      pooled.data.row_ptr(row));
            pooled.labels[row] = env.labels[i];
            pooled.id_mask[row] = env.id_mask[i];
            pooled.env_tag[row] = static_cast<int>(e);
            if (pooled.regression) {
                std::copy(env.targets.row_ptr(i), env.targets.row_ptr(i) + env.targets.cols(),
                          pooled.targets.row_ptr(row));
            }
        }
    }
    return pooled;
}

double estimate_sigma(const LossStats& stats, double p_i, double p_o) {
    const double denom = p_i * p_i - p_o * p_o;
    if (p_i <= p_o || denom <= 0.0) {
        throw Error(ErrorCode::DegenerateProportions, "sigma estimator needs p_i > p_o");
    }
    const double sigma = 1.0 - (stats.max - stats.min) / denom;
    return std::clamp(sigma, 0.0, 1.0);
}

double threshold_delta(double sigma, double p_i, double p_o) {
    if (sigma < 0.0 || sigma > 1.0) {
        throw Error(ErrorCode::InvalidInput, "sigma outside [0, 1]");
    }
    return p_o * (p_i - p_o) * (1.0 - sigma);
}

std::vector<std::uint8_t> identify_spurious(const std::vector<double>& per_sample_losses,
                                            std::optional<double> prev_mean, double delta,
                                            IdentMode mode) {
    std::vector<std::uint8_t> mask(per_sample_losses.size(), 0);
    if (!prev_mean.has_value()) return mask;
    const double mean = *prev_mean;
    for (std::size_t i = 0; i < per_sample_losses.size(); ++i) {
        const double loss = per_sample_losses[i];
        const bool flag = mode == IdentMode::Textual ? (loss <= mean - delta)
                                                     : (loss - mean < delta);
        mask[i] = flag ? 1 : 0;
    }
    return mask;
}

double eta_value(double per_sample_loss, const SfpConfig& cfg) {
    if (cfg.eta_mode == EtaMode::Fixed) return cfg.eta_fixed;
    return 2.0 * std::sqrt(std::max(per_sample_loss, 0.0));
}

LossStats initial_loss_stats(const models::ModelState& model, const PooledData& data) {
    LossStats stats;
    const std::size_t chunk = 1024;
    const std::size_t n = data.data.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t first = 0; first < n; first += chunk) {
        const std::size_t count = std::min(chunk, n - first);
        const BatchView batch = gather(data, order, first, count);
        const models::ForwardPass fwd = models::forward(model, batch.data);
        if (data.regression) {
            stats.accumulate(models::per_sample_squared_losses(fwd.outputs, batch.targets));
        } else {
            stats.accumulate(
                models::per_sample_ce_losses(models::softmax_rows(fwd.outputs), batch.labels));
        }
    }
    return stats.rolled();
}

EpochOutcome sfp_epoch(const models::ModelState& model, const PooledData& data,
                       const SfpConfig& cfg, const LossStats& carry,
                       std::size_t epoch_index) {
    validate(cfg);
    return run_epoch(Method::Sfp, model, data, cfg, carry, epoch_index, {});
}

SparseModel prune_model(const models::ModelState& model, const Matrix& identified_features,
                        double tau) {
    const std::size_t m = model.spec.feature_dim;
    if (identified_features.rows() < m) {
        throw Error(ErrorCode::InsufficientFeatures,
                    "need at least feature_dim identified feature rows");
    }
    if (identified_features.cols() != m) {
        throw Error(ErrorCode::InvalidInput, "feature width does not match the model");
    }
    const SvdResult d = svd(identified_features);
    const std::size_t theta = energy_rank(d.s, tau);
    SparseModel out;
    out.base = model;
    out.kept_basis = d.v.cols_range(0, theta);
    out.theta = theta;
    return out;
}

TrainResult train(Method method, const SfpConfig& cfg,
                  const std::vector<const datasets::Environment*>& envs,
                  const datasets::Environment* test_env) {
    validate(cfg);
    const PooledData pooled = pool_environments(envs);

    models::ModelSpec spec;
    if (pooled.regression) {
        spec.kind = models::ModelKind::Linear;
        spec.input_dim = pooled.data.cols();
        spec.feature_dim = pooled.targets.cols();
        spec.classes = pooled.targets.cols();
    } else {
        spec.kind = models::ModelKind::Mlp;
        spec.input_dim = pooled.data.cols();
        spec.feature_dim = cfg.feature_dim;
        spec.classes = static_cast<std::size_t>(pooled.classes);
    }

    TrainResult result;
    result.model = models::init_model(spec, cfg.seed);

    MrmState mrm;
    const bool use_mrm = method == Method::Mrm;
    if (use_mrm) {
        mrm.logits = Matrix(result.model.w.rows(), result.model.w.cols(), 3.0);
    }

    LossStats carry = initial_loss_stats(result.model, pooled);
    std::vector<std::vector<double>> collected_features;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        EpochScratch scratch;
        if (use_mrm) scratch.mrm = &mrm;
        const bool last = epoch + 1 == cfg.epochs;
        if (last && method_uses_sfp(method) && cfg.prune) {
            scratch.feature_collector = &collected_features;
        }
        EpochOutcome outcome = run_epoch(method, result.model, pooled, cfg, carry, epoch, scratch);
        result.model = std::move(outcome.model);
        carry = outcome.stats;
        if (test_env != nullptr) {
            if (use_mrm) {
                models::ModelState view = result.model;
                for (std::size_t i = 0; i < view.w.size(); ++i) {
                    if (sigmoid(mrm.logits.data()[i]) <= 0.5) view.w.data()[i] = 0.0;
                }
                outcome.record.test_acc = evaluate(view, *test_env).accuracy;
            } else {
                outcome.record.test_acc = evaluate(result.model, *test_env).accuracy;
            }
        }
        result.trace.push_back(outcome.record);
    }

    if (use_mrm) {
        // keep weights whose mask probability ended above one half
        for (std::size_t i = 0; i < result.model.w.size(); ++i) {
            if (sigmoid(mrm.logits.data()[i]) <= 0.5) result.model.w.data()[i] = 0.0;
        }
    }

    if (method_uses_sfp(method) && cfg.prune &&
        collected_features.size() >= result.model.spec.feature_dim) {
        result.pruned = prune_model(result.model, Matrix::from_rows(collected_features), cfg.tau);
    }
    return result;
}

EvalResult evaluate(const models::ModelState& model, const datasets::Environment& env) {
    return evaluate_impl(model, nullptr, 0, env);
}

EvalResult evaluate(const SparseModel& model, const datasets::Environment& env) {
    return evaluate_impl(model.base, &model.kept_basis, model.theta, env);
}

}  // namespace sfp::train
