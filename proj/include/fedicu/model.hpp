#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "fedicu/arch.hpp"
#include "fedicu/layers.hpp"
#include "fedicu/params.hpp"

// Whole-model forward and backward over the dual-channel graph. Train-mode
// forward uses batch statistics and updates the running statistics in the
// parameter set; eval mode reads running statistics only and never mutates.

namespace fedicu {

enum class Mode { train, eval };

struct ChannelCache {
    std::vector<FrnnCache> frnn;
    std::vector<LstmCache> lstm;
    std::vector<GruCache> gru;
    Conv1dCache conv;
    std::size_t conv_out_steps = 0;
    BatchNormCache bn;
};

struct ModelCache {
    bool train_mode = false;
    std::size_t batch = 0;
    ChannelCache vitals, labs;
    DenseCache fc1, fc2;
    ReluCache relu;
    std::vector<double> probs;
};

namespace detail {

inline FrnnWeights frnn_weights(const ParameterSet& p, const std::string& pre) {
    return {&p.at(pre + ".W"), &p.at(pre + ".U"), &p.at(pre + ".b")};
}
inline LstmWeights lstm_weights(const ParameterSet& p, const std::string& pre) {
    return {&p.at(pre + ".Wi"), &p.at(pre + ".Ui"), &p.at(pre + ".bi"),
            &p.at(pre + ".Wf"), &p.at(pre + ".Uf"), &p.at(pre + ".bf"),
            &p.at(pre + ".Wo"), &p.at(pre + ".Uo"), &p.at(pre + ".bo"),
            &p.at(pre + ".Wg"), &p.at(pre + ".Ug"), &p.at(pre + ".bg")};
}
inline GruWeights gru_weights(const ParameterSet& p, const std::string& pre) {
    return {&p.at(pre + ".Wz"), &p.at(pre + ".Uz"), &p.at(pre + ".bz"),
            &p.at(pre + ".Wr"), &p.at(pre + ".Ur"), &p.at(pre + ".br"),
            &p.at(pre + ".Wh"), &p.at(pre + ".Uh"), &p.at(pre + ".bh")};
}
inline FrnnGrads frnn_grads(ParameterSet& g, const std::string& pre) {
    return {&g.at(pre + ".W"), &g.at(pre + ".U"), &g.at(pre + ".b")};
}
inline LstmGrads lstm_grads(ParameterSet& g, const std::string& pre) {
    return {&g.at(pre + ".Wi"), &g.at(pre + ".Ui"), &g.at(pre + ".bi"),
            &g.at(pre + ".Wf"), &g.at(pre + ".Uf"), &g.at(pre + ".bf"),
            &g.at(pre + ".Wo"), &g.at(pre + ".Uo"), &g.at(pre + ".bo"),
            &g.at(pre + ".Wg"), &g.at(pre + ".Ug"), &g.at(pre + ".bg")};
}
inline GruGrads gru_grads(ParameterSet& g, const std::string& pre) {
    return {&g.at(pre + ".Wz"), &g.at(pre + ".Uz"), &g.at(pre + ".bz"),
            &g.at(pre + ".Wr"), &g.at(pre + ".Ur"), &g.at(pre + ".br"),
            &g.at(pre + ".Wh"), &g.at(pre + ".Uh"), &g.at(pre + ".bh")};
}

// Last-timestep block of a [T,B,H] sequence as a [B,H] matrix.
inline Tensor last_step(const Tensor& seq) {
    const std::size_t steps = seq.dim(0), batch = seq.dim(1), hidden = seq.dim(2);
    Tensor out({batch, hidden});
    std::memcpy(out.data.data(), &seq.data[(steps - 1) * batch * hidden],
                batch * hidden * sizeof(double));
    return out;
}

inline Tensor channel_forward(const std::vector<LayerSpec>& layers, const ParameterSet& params,
                              ParameterSet* running_target, const Tensor& input, Mode mode,
                              ChannelCache* cache) {
    Tensor feat;  // [B, width] readout entering batch norm
    bool recurrent = layers.front().kind != LayerSpec::Kind::conv1d;
    if (recurrent) {
        Tensor seq = to_time_major(input);
        for (const auto& l : layers) {
            if (l.kind == LayerSpec::Kind::batchnorm) break;
            if (l.kind == LayerSpec::Kind::frnn) {
                FrnnCache* c = nullptr;
                if (cache) c = &cache->frnn.emplace_back();
                seq = frnn_forward(seq, frnn_weights(params, l.name), c);
            } else if (l.kind == LayerSpec::Kind::lstm) {
                LstmCache* c = nullptr;
                if (cache) c = &cache->lstm.emplace_back();
                seq = lstm_forward(seq, lstm_weights(params, l.name), c);
            } else if (l.kind == LayerSpec::Kind::gru) {
                GruCache* c = nullptr;
                if (cache) c = &cache->gru.emplace_back();
                seq = gru_forward(seq, gru_weights(params, l.name), c);
            }
            require_finite(seq, l.name);
        }
        feat = last_step(seq);
    } else {
        const auto& conv = layers.front();
        Tensor y = conv1d_forward(input, params.at(conv.name + ".K"), params.at(conv.name + ".b"),
                                  cache ? &cache->conv : nullptr);
        require_finite(y, conv.name);
        if (cache) cache->conv_out_steps = y.dim(1);
        feat = flatten2(y);
    }
    const auto& bn = layers.back();
    Tensor out;
    if (mode == Mode::train) {
        out = batchnorm_forward_train(feat, params.at(bn.name + ".gamma"),
                                      params.at(bn.name + ".beta"),
                                      running_target->at(bn.name + ".running_mean"),
                                      running_target->at(bn.name + ".running_var"),
                                      kBatchNormMomentum, kBatchNormEps,
                                      cache ? &cache->bn : nullptr);
    } else {
        out = batchnorm_forward_eval(feat, params.at(bn.name + ".gamma"),
                                     params.at(bn.name + ".beta"),
                                     params.at(bn.name + ".running_mean"),
                                     params.at(bn.name + ".running_var"), kBatchNormEps);
    }
    require_finite(out, bn.name);
    return out;
}

inline std::vector<double> forward_impl(const ArchitectureSpec& spec, const ParameterSet& params,
                                        ParameterSet* running_target, const Tensor& vitals,
                                        const Tensor& labs, Mode mode, ModelCache* cache) {
    if (vitals.rank() != 3 || vitals.dim(1) != spec.vitals_steps ||
        vitals.dim(2) != kVitalsFeatures) {
        throw ConfigError("vitals batch shape does not match the architecture");
    }
    if (labs.rank() != 3 || labs.dim(1) != spec.labs_steps || labs.dim(2) != kLabsFeatures) {
        throw ConfigError("labs batch shape does not match the architecture");
    }
    if (vitals.dim(0) != labs.dim(0)) throw ConfigError("channel batch sizes differ");
    const std::size_t batch = vitals.dim(0);
    if (mode == Mode::train && running_target == nullptr)
        throw ContractError("train-mode forward requires a mutable parameter set");

    if (cache) {
        *cache = ModelCache{};
        cache->train_mode = mode == Mode::train;
        cache->batch = batch;
    }
    Tensor v = channel_forward(spec.vitals_layers, params, running_target, vitals, mode,
                               cache ? &cache->vitals : nullptr);
    Tensor l = channel_forward(spec.labs_layers, params, running_target, labs, mode,
                               cache ? &cache->labs : nullptr);

    Tensor cat({batch, spec.vitals_out + spec.labs_out});
    for (std::size_t b = 0; b < batch; ++b) {
        std::memcpy(&cat(b, 0), &v(b, 0), spec.vitals_out * sizeof(double));
        std::memcpy(&cat(b, spec.vitals_out), &l(b, 0), spec.labs_out * sizeof(double));
    }

    Tensor h1 = dense_forward(cat, params.at("head.fc1.W"), params.at("head.fc1.b"),
                              cache ? &cache->fc1 : nullptr);
    require_finite(h1, "head.fc1");
    Tensor a1 = relu_forward(h1, cache ? &cache->relu : nullptr);
    Tensor z2 = dense_forward(a1, params.at("head.fc2.W"), params.at("head.fc2.b"),
                              cache ? &cache->fc2 : nullptr);
    require_finite(z2, "head.fc2");

    std::vector<double> probs(batch);
    for (std::size_t b = 0; b < batch; ++b) probs[b] = detail::sigmoid(z2(b, 0));
    require_finite(probs, "output");
    if (cache) cache->probs = probs;
    return probs;
}

inline void channel_backward(const std::vector<LayerSpec>& layers, const ParameterSet& params,
                             const ChannelCache& cache, const Tensor& d_out, ParameterSet& grads,
                             std::size_t steps) {
    const auto& bn = layers.back();
    Tensor d_feat = batchnorm_backward(cache.bn, params.at(bn.name + ".gamma"), d_out,
                                       grads.at(bn.name + ".gamma"), grads.at(bn.name + ".beta"));
    bool recurrent = layers.front().kind != LayerSpec::Kind::conv1d;
    if (recurrent) {
        const std::size_t batch = d_feat.dim(0), hidden = d_feat.dim(1);
        // Readout is the last timestep of the top layer; lower layers get the
        // full-sequence gradient from the layer above.
        Tensor dh_seq({steps, batch, hidden});
        std::memcpy(&dh_seq.data[(steps - 1) * batch * hidden], d_feat.data.data(),
                    batch * hidden * sizeof(double));
        std::size_t ri = 0;
        for (const auto& l : layers) {
            if (l.kind != LayerSpec::Kind::batchnorm && l.kind != LayerSpec::Kind::flatten) ++ri;
        }
        for (std::size_t idx = ri; idx-- > 0;) {
            const auto& l = layers[idx];
            if (l.kind == LayerSpec::Kind::frnn) {
                dh_seq = frnn_backward(cache.frnn[idx], frnn_weights(params, l.name), dh_seq,
                                       frnn_grads(grads, l.name));
            } else if (l.kind == LayerSpec::Kind::lstm) {
                dh_seq = lstm_backward(cache.lstm[idx], lstm_weights(params, l.name), dh_seq,
                                       lstm_grads(grads, l.name));
            } else if (l.kind == LayerSpec::Kind::gru) {
                dh_seq = gru_backward(cache.gru[idx], gru_weights(params, l.name), dh_seq,
                                      gru_grads(grads, l.name));
            }
            require_finite(dh_seq, l.name + " backward");
        }
    } else {
        const auto& conv = layers.front();
        Tensor dy = d_feat;
        dy.shape = {d_feat.dim(0), cache.conv_out_steps, kConvFilters};
        conv1d_backward(cache.conv, params.at(conv.name + ".K"), dy, nullptr,
                        grads.at(conv.name + ".K"), grads.at(conv.name + ".b"));
    }
}

}  // namespace detail

// Train-mode forward: batch-norm uses batch statistics and updates the running
// statistics stored in `params`. Pass a cache to enable backward().
inline std::vector<double> model_forward(const ArchitectureSpec& spec, ParameterSet& params,
                                         const Tensor& vitals, const Tensor& labs, Mode mode,
                                         ModelCache* cache = nullptr) {
    return detail::forward_impl(spec, params, mode == Mode::train ? &params : nullptr, vitals,
                                labs, mode, cache);
}

// Eval-mode forward over const parameters.
inline std::vector<double> model_predict(const ArchitectureSpec& spec, const ParameterSet& params,
                                         const Tensor& vitals, const Tensor& labs) {
    return detail::forward_impl(spec, params, nullptr, vitals, labs, Mode::eval, nullptr);
}

// Exact analytic gradients for every trainable parameter, from a train-mode
// cache and dLoss/dPredictions. Running statistics receive no gradient.
inline ParameterSet model_backward(const ArchitectureSpec& spec, const ParameterSet& params,
                                   const ModelCache& cache, const std::vector<double>& dprobs) {
    if (!cache.train_mode) throw ContractError("backward requires a train-mode cache");
    if (dprobs.size() != cache.batch) throw ContractError("loss gradient size mismatch");
    const std::size_t batch = cache.batch;

    ParameterSet grads = trainables_like(params);

    Tensor dz2({batch, 1});
    for (std::size_t b = 0; b < batch; ++b) {
        const double p = cache.probs[b];
        dz2(b, 0) = dprobs[b] * p * (1.0 - p);
    }
    Tensor da1;
    dense_backward(cache.fc2, params.at("head.fc2.W"), dz2, &da1, grads.at("head.fc2.W"),
                   grads.at("head.fc2.b"));
    Tensor dh1 = relu_backward(cache.relu, da1);
    Tensor dcat;
    dense_backward(cache.fc1, params.at("head.fc1.W"), dh1, &dcat, grads.at("head.fc1.W"),
                   grads.at("head.fc1.b"));

    Tensor dv({batch, spec.vitals_out}), dl({batch, spec.labs_out});
    for (std::size_t b = 0; b < batch; ++b) {
        std::memcpy(&dv(b, 0), &dcat(b, 0), spec.vitals_out * sizeof(double));
        std::memcpy(&dl(b, 0), &dcat(b, spec.vitals_out), spec.labs_out * sizeof(double));
    }
    detail::channel_backward(spec.vitals_layers, params, cache.vitals, dv, grads,
                             spec.vitals_steps);
    detail::channel_backward(spec.labs_layers, params, cache.labs, dl, grads, spec.labs_steps);
    for (const auto& e : grads) require_finite(e.values, e.name + " gradient");
    return grads;
}

}  // namespace fedicu
