#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/rng.hpp"

// Stratified splitting: k-fold cross-validation folds and train/validation
// sub-splits, both preserving the class ratio and fully seed-deterministic.

namespace fedicu {

struct SplitPlan {
    int folds = 0;
    std::vector<int> fold_of;  // sample index -> fold
    std::uint64_t seed = 0;

    std::vector<std::size_t> test_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] == fold) out.push_back(i);
        return out;
    }

    std::vector<std::size_t> trainval_indices(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < fold_of.size(); ++i)
            if (fold_of[i] != fold) out.push_back(i);
        return out;
    }
};

// Each class is shuffled once with its own seeded stream, then dealt
// round-robin, so per-fold class counts differ by at most one within a class.
inline SplitPlan stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("k-fold: need at least 2 folds");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw ConfigError("k-fold: labels must be 0 or 1");
        (labels[i] == 1 ? pos : neg).push_back(i);
    }
    if (pos.size() < static_cast<std::size_t>(k) || neg.size() < static_cast<std::size_t>(k))
        throw ConfigError("k-fold: each class needs at least k members");

    SplitPlan plan;
    plan.folds = k;
    plan.seed = seed;
    plan.fold_of.assign(labels.size(), -1);
    const std::vector<std::size_t>* classes[2] = {&neg, &pos};
    for (std::size_t c = 0; c < 2; ++c) {
        std::vector<std::size_t> members = *classes[c];
        Rng rng(mix_seed(seed, 0xF01dULL, c));
        rng.shuffle(members);
        for (std::size_t i = 0; i < members.size(); ++i)
            plan.fold_of[members[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    return plan;
}

struct TrainValSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

// Stratified train/validation split of `indices` (85/15 by default). The
// validation part takes round(fraction * n_c) members of each class.
inline TrainValSplit split_train_val(const std::vector<std::size_t>& indices,
                                     const std::vector<int>& labels, double val_fraction,
                                     std::uint64_t seed) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw ConfigError("train/val split: fraction must be in (0,1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i : indices) (labels[i] == 1 ? pos : neg).push_back(i);

    TrainValSplit out;
    std::vector<std::size_t>* classes[2] = {&neg, &pos};
    for (std::size_t c = 0; c < 2; ++c) {
        std::vector<std::size_t>& members = *classes[c];
        Rng rng(mix_seed(seed, 0x8515ULL, c));
        rng.shuffle(members);
        std::size_t n_val = static_cast<std::size_t>(
            std::llround(val_fraction * static_cast<double>(members.size())));
        if (members.size() > 1) {
            n_val = std::max<std::size_t>(1, std::min(n_val, members.size() - 1));
        } else {
            n_val = 0;  // a singleton class stays in training
        }
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_val ? out.val : out.train).push_back(members[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    if (out.train.empty() || out.val.empty())
        throw ConfigError("train/val split: a part came out empty");
    return out;
}

}  // namespace fedicu
