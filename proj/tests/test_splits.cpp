#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "fedicu/splits.hpp"

using namespace fedicu;

namespace {

std::vector<int> imbalanced_labels(std::size_t n, std::size_t n_pos) {
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n_pos; ++i) labels[i] = 1;
    return labels;
}

std::size_t positives_in(const std::vector<std::size_t>& idx, const std::vector<int>& labels) {
    std::size_t pos = 0;
    for (std::size_t i : idx) pos += static_cast<std::size_t>(labels[i]);
    return pos;
}

}  // namespace

TEST_CASE("k-fold with exact divisibility: 2 positives and 18 negatives per fold",
          "[splits]") {
    std::vector<int> labels = imbalanced_labels(100, 10);
    SplitPlan plan = stratified_kfold(labels, 5, 3);
    REQUIRE(plan.folds == 5);
    for (int f = 0; f < 5; ++f) {
        auto test = plan.test_indices(f);
        REQUIRE(test.size() == 20);
        REQUIRE(positives_in(test, labels) == 2);
    }
}

TEST_CASE("k-fold is a partition with per-class counts within one", "[splits]") {
    std::vector<int> labels = imbalanced_labels(1003, 97);
    SplitPlan plan = stratified_kfold(labels, 5, 11);

    std::set<std::size_t> seen;
    std::vector<std::size_t> pos_counts;
    for (int f = 0; f < 5; ++f) {
        auto test = plan.test_indices(f);
        auto rest = plan.trainval_indices(f);
        REQUIRE(test.size() + rest.size() == labels.size());
        for (std::size_t i : test) REQUIRE(seen.insert(i).second);
        pos_counts.push_back(positives_in(test, labels));
    }
    REQUIRE(seen.size() == labels.size());
    const auto [mn, mx] = std::minmax_element(pos_counts.begin(), pos_counts.end());
    REQUIRE(*mx - *mn <= 1);
}

TEST_CASE("ICU-scale fold arithmetic: 1892 positives over 5 folds", "[splits]") {
    std::vector<int> labels = imbalanced_labels(19414, 1892);
    SplitPlan plan = stratified_kfold(labels, 5, 1);
    for (int f = 0; f < 5; ++f) {
        const std::size_t pos = positives_in(plan.test_indices(f), labels);
        REQUIRE((pos == 378 || pos == 379));  // 1892 = 5*378 + 2
    }
}

TEST_CASE("k-fold determinism and input validation", "[splits]") {
    std::vector<int> labels = imbalanced_labels(200, 30);
    SplitPlan a = stratified_kfold(labels, 5, 7);
    SplitPlan b = stratified_kfold(labels, 5, 7);
    REQUIRE(a.fold_of == b.fold_of);
    SplitPlan c = stratified_kfold(labels, 5, 8);
    REQUIRE(a.fold_of != c.fold_of);

    REQUIRE_THROWS_AS(stratified_kfold(labels, 1, 7), ConfigError);
    REQUIRE_THROWS_AS(stratified_kfold(imbalanced_labels(100, 3), 5, 7), ConfigError);
    std::vector<int> bad(50, 0);
    bad[0] = 2;
    REQUIRE_THROWS_AS(stratified_kfold(bad, 5, 7), ConfigError);
}

TEST_CASE("train/val split: 85/15 with stratified rounding", "[splits]") {
    std::vector<int> labels = imbalanced_labels(1000, 100);
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

    TrainValSplit tv = split_train_val(all, labels, 0.15, 5);
    REQUIRE(tv.val.size() == 150);   // round(0.15*100) + round(0.15*900)
    REQUIRE(tv.train.size() == 850);
    REQUIRE(positives_in(tv.val, labels) == 15);
    REQUIRE(positives_in(tv.train, labels) == 85);

    std::set<std::size_t> seen(tv.train.begin(), tv.train.end());
    for (std::size_t i : tv.val) REQUIRE(seen.insert(i).second);
    REQUIRE(seen.size() == all.size());
    REQUIRE(std::is_sorted(tv.train.begin(), tv.train.end()));
    REQUIRE(std::is_sorted(tv.val.begin(), tv.val.end()));
}

TEST_CASE("train/val split preserves the class ratio within half a point", "[splits]") {
    std::vector<int> labels = imbalanced_labels(19414, 1892);
    std::vector<std::size_t> all(labels.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const double global = 1892.0 / 19414.0;

    TrainValSplit tv = split_train_val(all, labels, 0.15, 21);
    const double train_frac =
        static_cast<double>(positives_in(tv.train, labels)) /
        static_cast<double>(tv.train.size());
    const double val_frac = static_cast<double>(positives_in(tv.val, labels)) /
                            static_cast<double>(tv.val.size());
    REQUIRE(std::abs(train_frac - global) < 0.005);
    REQUIRE(std::abs(val_frac - global) < 0.005);
}

TEST_CASE("train/val split on a subset only uses the given indices", "[splits]") {
    std::vector<int> labels = imbalanced_labels(60, 12);
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < 60; i += 2) subset.push_back(i);  // evens only

    TrainValSplit tv = split_train_val(subset, labels, 0.2, 2);
    std::set<std::size_t> allowed(subset.begin(), subset.end());
    for (std::size_t i : tv.train) REQUIRE(allowed.count(i) == 1);
    for (std::size_t i : tv.val) REQUIRE(allowed.count(i) == 1);
    REQUIRE(tv.train.size() + tv.val.size() == subset.size());
}

TEST_CASE("train/val split: degenerate sizes and validation", "[splits]") {
    std::vector<int> labels = imbalanced_labels(10, 2);
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

    // round(0.15*2) = 0 positives would leave validation without the class; the
    // floor keeps one member of each multi-member class in validation
    TrainValSplit tv = split_train_val(all, labels, 0.15, 3);
    REQUIRE(positives_in(tv.val, labels) == 1);
    REQUIRE(positives_in(tv.train, labels) == 1);

    // a singleton class stays in training entirely
    std::vector<int> lone = imbalanced_labels(10, 1);
    TrainValSplit tv2 = split_train_val(all, lone, 0.15, 3);
    REQUIRE(positives_in(tv2.train, lone) == 1);
    REQUIRE(positives_in(tv2.val, lone) == 0);

    REQUIRE_THROWS_AS(split_train_val(all, labels, 0.0, 3), ConfigError);
    REQUIRE_THROWS_AS(split_train_val(all, labels, 1.0, 3), ConfigError);
    std::vector<std::size_t> one{0};  // nothing left for validation
    REQUIRE_THROWS_AS(split_train_val(one, labels, 0.5, 3), ConfigError);
}

TEST_CASE("different folds give different test sets but a stable plan", "[splits]") {
    std::vector<int> labels = imbalanced_labels(300, 60);
    SplitPlan plan = stratified_kfold(labels, 5, 13);
    auto t0 = plan.test_indices(0);
    auto t1 = plan.test_indices(1);
    REQUIRE(t0 != t1);
    // re-deriving from the same plan object is free of hidden state
    REQUIRE(plan.test_indices(0) == t0);
}
