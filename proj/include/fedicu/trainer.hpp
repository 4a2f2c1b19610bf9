#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "fedicu/adam.hpp"
#include "fedicu/arch.hpp"
#include "fedicu/early_stop.hpp"
#include "fedicu/errors.hpp"
#include "fedicu/log.hpp"
#include "fedicu/loss.hpp"
#include "fedicu/model.hpp"
#include "fedicu/pipeline.hpp"
#include "fedicu/rng.hpp"

// Mini-batch training: the epoch primitive shared by centralized training and
// federated local passes (so the K=1 degenerate case reduces to centralized
// training exactly), plus the full early-stopping loop with best-weight
// restoration.

namespace fedicu {

// Windowed samples stacked into dense batch-major tensors.
struct Dataset {
    Tensor vitals;  // [N, W, 7]
    Tensor labs;    // [N, W/8, 16]
    std::vector<double> labels;

    std::size_t size() const { return labels.size(); }

    static Dataset from_samples(const std::vector<WindowedSample>& samples) {
        if (samples.empty()) throw ConfigError("dataset: no samples");
        const std::size_t n = samples.size();
        const std::size_t tv = samples.front().vitals.dim(0);
        const std::size_t tl = samples.front().labs.dim(0);
        Dataset d;
        d.vitals = Tensor({n, tv, kVitalsCount});
        d.labs = Tensor({n, tl, kLabsCount});
        d.labels.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const WindowedSample& s = samples[i];
            if (s.vitals.dim(0) != tv || s.labs.dim(0) != tl)
                throw ContractError("dataset: samples use different windows");
            std::memcpy(&d.vitals(i, 0, 0), s.vitals.data.data(),
                        s.vitals.numel() * sizeof(double));
            std::memcpy(&d.labs(i, 0, 0), s.labs.data.data(), s.labs.numel() * sizeof(double));
            d.labels[i] = static_cast<double>(s.label);
        }
        return d;
    }

    // Rows gathered in the given order.
    Dataset gather(const std::vector<std::size_t>& indices) const {
        if (indices.empty()) throw ContractError("dataset: empty gather");
        const std::size_t tv = vitals.dim(1), tl = labs.dim(1);
        Dataset d;
        d.vitals = Tensor({indices.size(), tv, kVitalsCount});
        d.labs = Tensor({indices.size(), tl, kLabsCount});
        d.labels.resize(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const std::size_t src = indices[i];
            if (src >= size()) throw ContractError("dataset: gather index out of range");
            std::memcpy(&d.vitals(i, 0, 0), &vitals(src, 0, 0),
                        tv * kVitalsCount * sizeof(double));
            std::memcpy(&d.labs(i, 0, 0), &labs(src, 0, 0), tl * kLabsCount * sizeof(double));
            d.labels[i] = labels[src];
        }
        return d;
    }

    std::vector<int> int_labels() const {
        std::vector<int> out(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) out[i] = static_cast<int>(labels[i]);
        return out;
    }
};

namespace detail {

inline void gather_batch(const Dataset& data, const std::vector<std::size_t>& order,
                         std::size_t begin, std::size_t end, Tensor& vitals, Tensor& labs,
                         std::vector<double>& labels) {
    const std::size_t b = end - begin;
    const std::size_t tv = data.vitals.dim(1), tl = data.labs.dim(1);
    vitals = Tensor({b, tv, kVitalsCount});
    labs = Tensor({b, tl, kLabsCount});
    labels.resize(b);
    for (std::size_t i = 0; i < b; ++i) {
        const std::size_t src = order[begin + i];
        std::memcpy(&vitals(i, 0, 0), &data.vitals(src, 0, 0),
                    tv * kVitalsCount * sizeof(double));
        std::memcpy(&labs(i, 0, 0), &data.labs(src, 0, 0), tl * kLabsCount * sizeof(double));
        labels[i] = data.labels[src];
    }
}

}  // namespace detail

// One pass over `data`: seeded shuffle, then forward / weighted BCE /
// backward / Adam per mini-batch (the final short batch is kept). Returns the
// mean of the per-batch losses.
inline double run_epoch(const ArchitectureSpec& spec, ParameterSet& params, AdamState& opt,
                        const Dataset& data, const ClassWeights& weights, std::size_t batch_size,
                        double learning_rate, std::uint64_t shuffle_seed) {
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (batch_size > data.size()) throw ConfigError("batch size exceeds the training set");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(shuffle_seed);
    rng.shuffle(order);

    Tensor vitals, labs;
    std::vector<double> labels, dpred;
    ModelCache cache;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, data.size());
        detail::gather_batch(data, order, begin, end, vitals, labs, labels);
        const std::vector<double> probs =
            model_forward(spec, params, vitals, labs, Mode::train, &cache);
        const double loss = weighted_bce_loss(probs, labels, weights, &dpred);
        const ParameterSet grads = model_backward(spec, params, cache, dpred);
        adam_step(params, grads, opt, learning_rate);
        loss_sum += loss;
        ++batches;
    }
    return loss_sum / static_cast<double>(batches);
}

inline constexpr std::size_t kEvalChunk = 256;

// Model scores in dataset order, eval mode, fixed chunking for determinism.
inline std::vector<double> predict_scores(const ArchitectureSpec& spec,
                                          const ParameterSet& params, const Dataset& data) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores;
    scores.reserve(data.size());
    Tensor vitals, labs;
    std::vector<double> labels;
    for (std::size_t begin = 0; begin < data.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(begin + kEvalChunk, data.size());
        detail::gather_batch(data, order, begin, end, vitals, labs, labels);
        const std::vector<double> p = model_predict(spec, params, vitals, labs);
        scores.insert(scores.end(), p.begin(), p.end());
    }
    return scores;
}

// Class-weighted BCE over the whole set in eval mode (sample-weighted mean).
inline double evaluate_loss(const ArchitectureSpec& spec, const ParameterSet& params,
                            const Dataset& data, const ClassWeights& weights) {
    const std::vector<double> scores = predict_scores(spec, params, data);
    return weighted_bce_loss(scores, data.labels, weights);
}

struct TrainConfig {
    int max_epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 0.01;
    double decay_factor = 0.5;  // multiplies the lr every `decay_every` epochs
    int decay_every = 5;
    bool fixed_lr = false;  // disables the decay schedule
    int patience = 30;
    std::uint64_t seed = 0;
    std::uint64_t shuffle_token = 0;  // distinguishes parties sharing a seed

    void validate() const {
        if (max_epochs < 1) throw ConfigError("max epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch size must be >= 1");
        if (learning_rate <= 0.0) throw ConfigError("learning rate must be positive");
        if (decay_factor <= 0.0 || decay_factor > 1.0)
            throw ConfigError("decay factor must be in (0,1]");
        if (decay_every < 1) throw ConfigError("decay interval must be >= 1");
        if (patience < 1 || patience > max_epochs)
            throw ConfigError("patience must be in [1, max epochs]");
    }
};

// Effective learning rate at a 0-based epoch: lr0 * factor^(epoch / every),
// so epochs 0..every-1 run at lr0.
inline double scheduled_lr(const TrainConfig& config, int epoch) {
    if (config.fixed_lr) return config.learning_rate;
    return config.learning_rate *
           std::pow(config.decay_factor, static_cast<double>(epoch / config.decay_every));
}

struct EpochStat {
    int epoch = 0;  // 0-based
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainOutcome {
    ParameterSet best_params;
    int best_epoch = -1;  // 0-based index into history
    double best_val_loss = 0.0;
    std::vector<EpochStat> history;
    bool stopped_early = false;
    ParameterSet final_params;  // state after the last executed epoch
};

// Full training loop: seeded-shuffle epochs with Adam, class weights from the
// training labels, per-epoch weighted validation loss in eval mode, patience
// early stopping, and restoration of the best epoch's parameters.
inline TrainOutcome train(const ArchitectureSpec& spec, ParameterSet params,
                          const Dataset& train_data, const Dataset& val_data,
                          const TrainConfig& config) {
    config.validate();
    if (config.batch_size > train_data.size())
        throw ConfigError("batch size exceeds the training set");
    if (val_data.size() == 0) throw ConfigError("validation set is empty");

    const ClassWeights weights = compute_class_weights(train_data.labels);
    AdamState opt = AdamState::init(params);
    EarlyStopper stopper(config.patience);
    TrainOutcome out;
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = scheduled_lr(config, epoch);
        double train_loss;
        try {
            train_loss = run_epoch(spec, params, opt, train_data, weights, config.batch_size,
                                   lr, mix_seed(config.seed, static_cast<std::uint64_t>(epoch),
                                                config.shuffle_token));
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
        }
        const double val_loss = evaluate_loss(spec, params, val_data, weights);
        if (!std::isfinite(val_loss))
            throw NumericError("epoch " + std::to_string(epoch) + ": non-finite validation loss");
        out.history.push_back({epoch, lr, train_loss, val_loss});
        const bool stop = stopper.observe(val_loss);
        if (stopper.last_improved()) {
            out.best_params = params;
            out.best_epoch = epoch;
            out.best_val_loss = val_loss;
        }
        log_debug("epoch " + std::to_string(epoch) + ": lr " + std::to_string(lr) +
                  ", train loss " + std::to_string(train_loss) + ", val loss " +
                  std::to_string(val_loss));
        if (stop) {
            out.stopped_early = true;
            break;
        }
    }
    out.final_params = std::move(params);
    return out;
}

// One federated local pass: copy the received global parameters and run
// `epochs` epoch passes over the shard. `epoch_base` threads the round index
// into the shuffle stream so round r with one local epoch shuffles exactly
// like centralized epoch r.
inline ParameterSet local_pass(const ArchitectureSpec& spec, const ParameterSet& global_params,
                               AdamState& opt, const Dataset& shard, const ClassWeights& weights,
                               std::size_t batch_size, double learning_rate, int epochs,
                               std::uint64_t seed, std::uint64_t shuffle_token,
                               std::uint64_t epoch_base) {
    if (shard.size() == 0) throw ConfigError("local pass: empty shard");
    if (epochs < 1) throw ConfigError("local pass: epochs must be >= 1");
    ParameterSet params = global_params;
    for (int e = 0; e < epochs; ++e) {
        run_epoch(spec, params, opt, shard, weights, batch_size, learning_rate,
                  mix_seed(seed, epoch_base + static_cast<std::uint64_t>(e), shuffle_token));
    }
    return params;
}

}  // namespace fedicu
