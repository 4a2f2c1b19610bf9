#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/params.hpp"
#include "fedicu/rng.hpp"

namespace fedicu {

inline constexpr std::size_t kVitalsFeatures = 7;
inline constexpr std::size_t kLabsFeatures = 16;
inline constexpr std::size_t kHiddenUnits = 16;
inline constexpr std::size_t kRecurrentLayers = 3;
inline constexpr std::size_t kConvFilters = 16;
inline constexpr std::size_t kVitalsKernel = 8;
inline constexpr std::size_t kLabsKernel = 1;
inline constexpr double kBatchNormMomentum = 0.9;
inline constexpr double kBatchNormEps = 1e-5;

enum class ModelFamily { cnn1d, frnn, lstm, gru };

inline const char* family_name(ModelFamily f) {
    switch (f) {
        case ModelFamily::cnn1d: return "1dcnn";
        case ModelFamily::frnn: return "frnn";
        case ModelFamily::lstm: return "lstm";
        case ModelFamily::gru: return "gru";
    }
    return "?";
}

inline ModelFamily parse_family(const std::string& s) {
    if (s == "1dcnn" || s == "cnn" || s == "cnn1d") return ModelFamily::cnn1d;
    if (s == "frnn") return ModelFamily::frnn;
    if (s == "lstm") return ModelFamily::lstm;
    if (s == "gru") return ModelFamily::gru;
    throw ConfigError("unknown model family: " + s);
}

struct LayerSpec {
    enum class Kind { dense, conv1d, frnn, lstm, gru, batchnorm, concat, sigmoid, relu, flatten };
    Kind kind;
    std::string name;        // parameter name prefix, empty for parameterless layers
    std::size_t in = 0;      // input feature width
    std::size_t out = 0;     // output feature width (units / filters / channels)
    std::size_t kernel = 0;  // conv only
    std::size_t params = 0;  // trainable parameter count
};

// The dual-channel topology: per channel either 3 stacked recurrent layers of
// 16 units (readout = last hidden state) or one Conv1D + Flatten, then batch
// norm per channel, concatenation, dense(16) + ReLU, dense(1), sigmoid.
struct ArchitectureSpec {
    ModelFamily family = ModelFamily::lstm;
    std::size_t window_hours = 8;
    std::size_t vitals_steps = 8;
    std::size_t labs_steps = 1;
    std::size_t vitals_out = kHiddenUnits;  // channel width entering concat
    std::size_t labs_out = kHiddenUnits;
    std::vector<LayerSpec> vitals_layers;
    std::vector<LayerSpec> labs_layers;
    std::vector<LayerSpec> head_layers;
};

namespace detail {

inline std::size_t rnn_param_count(ModelFamily family, std::size_t in, std::size_t units) {
    const std::size_t per_gate = in * units + units * units + units;
    switch (family) {
        case ModelFamily::frnn: return per_gate;
        case ModelFamily::lstm: return 4 * per_gate;
        case ModelFamily::gru: return 3 * per_gate;
        default: throw ConfigError("not a recurrent family");
    }
}

inline LayerSpec::Kind rnn_kind(ModelFamily family) {
    switch (family) {
        case ModelFamily::frnn: return LayerSpec::Kind::frnn;
        case ModelFamily::lstm: return LayerSpec::Kind::lstm;
        case ModelFamily::gru: return LayerSpec::Kind::gru;
        default: throw ConfigError("not a recurrent family");
    }
}

inline std::vector<LayerSpec> build_channel(ModelFamily family, const std::string& channel,
                                            std::size_t steps, std::size_t features,
                                            std::size_t kernel, std::size_t* out_width) {
    std::vector<LayerSpec> layers;
    if (family == ModelFamily::cnn1d) {
        if (kernel > steps) throw ConfigError("conv kernel longer than the channel input");
        const std::size_t conv_steps = steps - kernel + 1;
        layers.push_back({LayerSpec::Kind::conv1d, channel + ".conv", features, kConvFilters,
                          kernel, kernel * features * kConvFilters + kConvFilters});
        layers.push_back({LayerSpec::Kind::flatten, "", kConvFilters,
                          conv_steps * kConvFilters, 0, 0});
        *out_width = conv_steps * kConvFilters;
    } else {
        std::size_t in = features;
        for (std::size_t l = 0; l < kRecurrentLayers; ++l) {
            layers.push_back({rnn_kind(family), channel + ".rnn" + std::to_string(l), in,
                              kHiddenUnits, 0, rnn_param_count(family, in, kHiddenUnits)});
            in = kHiddenUnits;
        }
        *out_width = kHiddenUnits;
    }
    layers.push_back(
        {LayerSpec::Kind::batchnorm, channel + ".bn", *out_width, *out_width, 0, 2 * *out_width});
    return layers;
}

}  // namespace detail

inline ArchitectureSpec build_architecture(ModelFamily family, std::size_t window_hours) {
    if (window_hours == 0 || window_hours % 8 != 0)
        throw ConfigError("window hours must be a positive multiple of 8");
    ArchitectureSpec spec;
    spec.family = family;
    spec.window_hours = window_hours;
    spec.vitals_steps = window_hours;      // 1h resampling
    spec.labs_steps = window_hours / 8;    // 8h resampling
    spec.vitals_layers = detail::build_channel(family, "vitals", spec.vitals_steps,
                                               kVitalsFeatures, kVitalsKernel, &spec.vitals_out);
    spec.labs_layers = detail::build_channel(family, "labs", spec.labs_steps, kLabsFeatures,
                                             kLabsKernel, &spec.labs_out);

    const std::size_t concat_width = spec.vitals_out + spec.labs_out;
    spec.head_layers.push_back({LayerSpec::Kind::concat, "", concat_width, concat_width, 0, 0});
    spec.head_layers.push_back({LayerSpec::Kind::dense, "head.fc1", concat_width, kHiddenUnits, 0,
                                concat_width * kHiddenUnits + kHiddenUnits});
    spec.head_layers.push_back({LayerSpec::Kind::relu, "", kHiddenUnits, kHiddenUnits, 0, 0});
    spec.head_layers.push_back(
        {LayerSpec::Kind::dense, "head.fc2", kHiddenUnits, 1, 0, kHiddenUnits + 1});
    spec.head_layers.push_back({LayerSpec::Kind::sigmoid, "", 1, 1, 0, 0});
    return spec;
}

inline std::size_t trainable_parameter_count(const ArchitectureSpec& spec) {
    std::size_t n = 0;
    for (const auto* group : {&spec.vitals_layers, &spec.labs_layers, &spec.head_layers}) {
        for (const auto& l : *group) n += l.params;
    }
    return n;
}

namespace detail {

inline void add_glorot(ParameterSet& out, Rng& rng, const std::string& name,
                       std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out) {
    Tensor t{std::move(shape)};
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-limit, limit);
    out.add(name, ParamKind::trainable, std::move(t));
}

inline void add_layer_params(ParameterSet& out, Rng& rng, const LayerSpec& l) {
    using K = LayerSpec::Kind;
    const auto& p = l.name;
    switch (l.kind) {
        case K::dense:
            add_glorot(out, rng, p + ".W", {l.in, l.out}, l.in, l.out);
            out.add(p + ".b", ParamKind::trainable, Tensor::zeros({l.out}));
            break;
        case K::conv1d:
            add_glorot(out, rng, p + ".K", {l.kernel, l.in, l.out}, l.kernel * l.in,
                       l.kernel * l.out);
            out.add(p + ".b", ParamKind::trainable, Tensor::zeros({l.out}));
            break;
        case K::frnn:
            add_glorot(out, rng, p + ".W", {l.in, l.out}, l.in, l.out);
            add_glorot(out, rng, p + ".U", {l.out, l.out}, l.out, l.out);
            out.add(p + ".b", ParamKind::trainable, Tensor::zeros({l.out}));
            break;
        case K::lstm:
            for (const char* gate : {"i", "f", "o", "g"}) {
                add_glorot(out, rng, p + ".W" + gate, {l.in, l.out}, l.in, l.out);
                add_glorot(out, rng, p + ".U" + gate, {l.out, l.out}, l.out, l.out);
                out.add(p + ".b" + gate, ParamKind::trainable, Tensor::zeros({l.out}));
            }
            break;
        case K::gru:
            for (const char* gate : {"z", "r", "h"}) {
                add_glorot(out, rng, p + ".W" + gate, {l.in, l.out}, l.in, l.out);
                add_glorot(out, rng, p + ".U" + gate, {l.out, l.out}, l.out, l.out);
                out.add(p + ".b" + gate, ParamKind::trainable, Tensor::zeros({l.out}));
            }
            break;
        case K::batchnorm:
            out.add(p + ".gamma", ParamKind::trainable, Tensor::full({l.out}, 1.0));
            out.add(p + ".beta", ParamKind::trainable, Tensor::zeros({l.out}));
            out.add(p + ".running_mean", ParamKind::running_stat, Tensor::zeros({l.out}));
            out.add(p + ".running_var", ParamKind::running_stat, Tensor::full({l.out}, 1.0));
            break;
        default:
            break;  // parameterless
    }
}

}  // namespace detail

// Glorot-uniform weight matrices, zero biases, unit scale / zero shift batch
// norm. Entry order depends only on the spec, so two sets from the same spec
// and seed are bit-identical and any two same-spec sets are combinable.
inline ParameterSet init_parameters(const ArchitectureSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    ParameterSet out;
    for (const auto* group : {&spec.vitals_layers, &spec.labs_layers, &spec.head_layers}) {
        for (const auto& l : *group) detail::add_layer_params(out, rng, l);
    }
    return out;
}

inline std::string architecture_summary(const ArchitectureSpec& spec) {
    std::ostringstream os;
    os << "family=" << family_name(spec.family) << " window=" << spec.window_hours
       << "h  vitals " << spec.vitals_steps << "x" << kVitalsFeatures << "  labs "
       << spec.labs_steps << "x" << kLabsFeatures << "\n";
    auto kind_name = [](LayerSpec::Kind k) {
        using K = LayerSpec::Kind;
        switch (k) {
            case K::dense: return "dense";
            case K::conv1d: return "conv1d";
            case K::frnn: return "frnn";
            case K::lstm: return "lstm";
            case K::gru: return "gru";
            case K::batchnorm: return "batchnorm";
            case K::concat: return "concat";
            case K::sigmoid: return "sigmoid";
            case K::relu: return "relu";
            case K::flatten: return "flatten";
        }
        return "?";
    };
    for (const auto& [title, group] :
         {std::pair{"vitals", &spec.vitals_layers}, {"labs", &spec.labs_layers},
          {"head", &spec.head_layers}}) {
        os << title << ":\n";
        for (const auto& l : *group) {
            os << "  " << kind_name(l.kind);
            if (!l.name.empty()) os << " (" << l.name << ")";
            os << "  " << l.in << " -> " << l.out;
            if (l.kernel > 0) os << "  kernel=" << l.kernel;
            os << "  params=" << l.params << "\n";
        }
    }
    os << "total trainable parameters: " << trainable_parameter_count(spec) << "\n";
    return os.str();
}

}  // namespace fedicu
