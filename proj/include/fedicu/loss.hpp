#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedicu/errors.hpp"

namespace fedicu {

// Per-class loss multipliers. w_pos = n/(2*n_pos), w_neg = n/(2*n_neg), so the
// expected total weight per class is equal and the mean weight is 1.
struct ClassWeights {
    double positive = 1.0;
    double negative = 1.0;
};

inline ClassWeights compute_class_weights(const std::vector<double>& labels) {
    std::size_t n_pos = 0;
    for (double y : labels) {
        if (y != 0.0 && y != 1.0) throw ContractError("labels must be 0 or 1");
        if (y == 1.0) ++n_pos;
    }
    const std::size_t n = labels.size();
    if (n_pos == 0 || n_pos == n)
        throw ConfigError("class weights undefined for a single-class training set");
    const double dn = static_cast<double>(n);
    return {dn / (2.0 * static_cast<double>(n_pos)),
            dn / (2.0 * static_cast<double>(n - n_pos))};
}

// Class-weighted binary cross-entropy, mean over the batch.
// Predictions are clamped to [1e-7, 1-1e-7] before the logs; that is the
// documented handling of p == 0 or 1, not an error.
inline double weighted_bce_loss(const std::vector<double>& predictions,
                                const std::vector<double>& labels, const ClassWeights& weights,
                                std::vector<double>* dloss_dpred = nullptr) {
    if (predictions.size() != labels.size())
        throw ContractError("weighted_bce_loss: size mismatch");
    if (predictions.empty()) throw ContractError("weighted_bce_loss: empty batch");
    if (weights.positive <= 0.0 || weights.negative <= 0.0)
        throw ContractError("weighted_bce_loss: class weights must be positive");

    const std::size_t n = predictions.size();
    const double inv_n = 1.0 / static_cast<double>(n);
    if (dloss_dpred) dloss_dpred->assign(n, 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double y = labels[i];
        if (y != 0.0 && y != 1.0) throw ContractError("labels must be 0 or 1");
        if (!std::isfinite(predictions[i]))
            throw NumericError("weighted_bce_loss: non-finite prediction");
        const double p = std::clamp(predictions[i], 1e-7, 1.0 - 1e-7);
        const double w = y == 1.0 ? weights.positive : weights.negative;
        loss -= w * (y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        if (dloss_dpred) (*dloss_dpred)[i] = w * (p - y) / (p * (1.0 - p)) * inv_n;
    }
    return loss * inv_n;
}

}  // namespace fedicu
