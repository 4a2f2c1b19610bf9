#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/log.hpp"

// Ranking and classification metrics for imbalanced binary outcomes.

namespace fedicu {

namespace detail {

inline void check_metric_inputs(const std::vector<double>& scores,
                                const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ContractError("metrics: size mismatch");
    if (scores.empty()) throw ContractError("metrics: empty input");
    for (int y : labels)
        if (y != 0 && y != 1) throw ContractError("metrics: labels must be 0 or 1");
}

}  // namespace detail

// Area under the precision-recall curve by the average-precision step rule:
// sort scores descending, sweep distinct thresholds, and add precision at each
// recall increment. Tied scores are processed as one group. A constant scorer
// therefore returns exactly the positive prevalence.
inline double auprc(const std::vector<double>& scores, const std::vector<int>& labels) {
    detail::check_metric_inputs(scores, labels);
    const std::size_t total_pos =
        static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    if (total_pos == 0 || total_pos == labels.size())
        throw ConfigError("auprc undefined for single-class labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    double area = 0.0;
    double recall_prev = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (labels[order[j]] == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += (recall - recall_prev) * precision;
        recall_prev = recall;
        i = j;
    }
    return area;
}

// F1 on predictions binarized at `threshold` (score >= threshold is positive).
// With no predicted and no actual positives both precision and recall are
// undefined; the result is 0 by convention.
inline double f1_score(const std::vector<double>& scores, const std::vector<int>& labels,
                       double threshold = 0.5) {
    detail::check_metric_inputs(scores, labels);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pred = scores[i] >= threshold;
        if (pred && labels[i] == 1)
            ++tp;
        else if (pred)
            ++fp;
        else if (labels[i] == 1)
            ++fn;
    }
    if (tp + fp == 0 && tp + fn == 0) {
        log_info("f1_score: no predicted and no actual positives; returning 0");
        return 0.0;
    }
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

struct MeanStd {
    double mean = 0.0;
    double stddev = 0.0;  // population (1/N)
    std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) throw ContractError("mean_std: empty input");
    MeanStd out;
    out.n = values.size();
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(out.n);
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(sq / static_cast<double>(out.n));
    return out;
}

}  // namespace fedicu
