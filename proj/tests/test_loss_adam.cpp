#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fedicu/adam.hpp"
#include "fedicu/loss.hpp"
#include "fedicu/rng.hpp"
#include "gradcheck_util.hpp"

using namespace fedicu;
using namespace fedicu::testing;

TEST_CASE("class weights: balanced, 10:1, and ICU-scale imbalance", "[loss]") {
    std::vector<double> balanced(50, 1.0);
    balanced.insert(balanced.end(), 50, 0.0);
    ClassWeights wb = compute_class_weights(balanced);
    REQUIRE(wb.positive == 1.0);
    REQUIRE(wb.negative == 1.0);

    std::vector<double> skewed(100, 1.0);
    skewed.insert(skewed.end(), 900, 0.0);
    ClassWeights ws = compute_class_weights(skewed);
    REQUIRE(ws.positive == 5.0);
    REQUIRE(ws.negative == Catch::Approx(0.5555555555555556).margin(1e-15));

    // 19414 samples, 1892 positive: w_pos = 19414/3784, w_neg = 19414/35044
    std::vector<double> icu(1892, 1.0);
    icu.insert(icu.end(), 19414 - 1892, 0.0);
    ClassWeights wi = compute_class_weights(icu);
    REQUIRE(wi.positive == Catch::Approx(5.130549682875264).margin(1e-12));
    REQUIRE(wi.negative == Catch::Approx(0.5539892706312065).margin(1e-12));
    // expected total weight per class is equal
    REQUIRE(wi.positive * 1892.0 == Catch::Approx(wi.negative * (19414.0 - 1892.0)).margin(1e-6));

    REQUIRE_THROWS_AS(compute_class_weights(std::vector<double>(10, 1.0)), ConfigError);
    REQUIRE_THROWS_AS(compute_class_weights(std::vector<double>(10, 0.0)), ConfigError);
    REQUIRE_THROWS_AS(compute_class_weights({0.0, 0.5, 1.0}), ContractError);
}

TEST_CASE("bce loss: analytic values", "[loss]") {
    // p=0.5, y=1, unit weights -> ln 2
    REQUIRE(weighted_bce_loss({0.5}, {1.0}, {1.0, 1.0}) ==
            Catch::Approx(0.6931471805599453).margin(1e-15));
    // p=[0.5,0.5], y=[1,0], weights (2,1) -> (2 ln2 + ln2)/2 = 1.5 ln2
    REQUIRE(weighted_bce_loss({0.5, 0.5}, {1.0, 0.0}, {2.0, 1.0}) ==
            Catch::Approx(1.0397207708399179).margin(1e-15));
    // perfect confident predictions -> clamp keeps the loss tiny and finite
    const double l = weighted_bce_loss({1.0, 0.0}, {1.0, 0.0}, {1.0, 1.0});
    REQUIRE(l > 0.0);
    REQUIRE(l < 1e-6);
    REQUIRE(std::isfinite(weighted_bce_loss({0.0}, {1.0}, {1.0, 1.0})));
}

TEST_CASE("bce loss: weight neutrality and input validation", "[loss]") {
    Rng rng(4);
    std::vector<double> p(20), y(20);
    for (std::size_t i = 0; i < 20; ++i) {
        p[i] = rng.uniform(0.05, 0.95);
        y[i] = rng.uniform01() < 0.4 ? 1.0 : 0.0;
    }
    // unit weights reduce to plain BCE
    double plain = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
        plain -= y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]);
    }
    plain /= 20.0;
    REQUIRE(weighted_bce_loss(p, y, {1.0, 1.0}) == Catch::Approx(plain).margin(1e-12));

    REQUIRE_THROWS_AS(weighted_bce_loss({0.5}, {1.0, 0.0}, {1.0, 1.0}), ContractError);
    REQUIRE_THROWS_AS(weighted_bce_loss({}, {}, {1.0, 1.0}), ContractError);
    REQUIRE_THROWS_AS(weighted_bce_loss({0.5}, {0.5}, {1.0, 1.0}), ContractError);
    REQUIRE_THROWS_AS(weighted_bce_loss({0.5}, {1.0}, {0.0, 1.0}), ContractError);
    REQUIRE_THROWS_AS(weighted_bce_loss({std::nan("")}, {1.0}, {1.0, 1.0}), NumericError);
}

TEST_CASE("bce gradient matches finite differences", "[loss]") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> p(6), y(6);
        for (std::size_t i = 0; i < 6; ++i) {
            p[i] = rng.uniform(0.05, 0.95);
            y[i] = rng.uniform01() < 0.5 ? 1.0 : 0.0;
        }
        if (trial == 0) { y.assign(6, 1.0); y[0] = 0.0; }  // near-single-class edge
        ClassWeights w{1.7, 0.6};
        std::vector<double> grad;
        weighted_bce_loss(p, y, w, &grad);
        for (std::size_t i = 0; i < 6; ++i) {
            auto loss = [&] { return weighted_bce_loss(p, y, w); };
            const double num = central_diff(&p[i], loss);
            REQUIRE(rel_err(grad[i], num) < 1e-6);
        }
    }
}

TEST_CASE("adam: zero gradients leave parameters unchanged and advance t", "[loss]") {
    ParameterSet p;
    p.add("w", ParamKind::trainable, Tensor({2, 2}, 3.0));
    p.add("s", ParamKind::running_stat, Tensor({2}, 0.7));
    AdamState st = AdamState::init(p);
    REQUIRE(st.m.size() == 1);  // running stats get no moments
    ParameterSet g = trainables_like(p);
    adam_step(p, g, st, 0.01);
    REQUIRE(st.t == 1);
    for (double v : p.at("w").data) REQUIRE(v == 3.0);
    for (double v : st.m[0].data) REQUIRE(v == 0.0);
    for (double v : st.v[0].data) REQUIRE(v == 0.0);
}

TEST_CASE("adam: one and two hand-computed steps with constant unit gradient", "[loss]") {
    ParameterSet p;
    p.add("w", ParamKind::trainable, Tensor({1}, 1.0));
    ParameterSet g;
    g.add("w", ParamKind::trainable, Tensor({1}, 1.0));
    AdamState st = AdamState::init(p);

    adam_step(p, g, st, 0.01);
    // m=0.1, v=0.001, mhat=vhat=1 -> w = 1 - 0.01/(1+1e-8)
    REQUIRE(p.at("w")(0) == Catch::Approx(0.9900000001).margin(1e-12));
    REQUIRE(st.t == 1);

    adam_step(p, g, st, 0.01);
    // m=0.19, v=0.001999; bias correction keeps mhat/sqrt(vhat) ~= 1
    REQUIRE(p.at("w")(0) == Catch::Approx(0.9800000002000001).margin(1e-12));
    REQUIRE(st.t == 2);
}

TEST_CASE("adam: only trainable entries move; running stats are untouched", "[loss]") {
    ParameterSet p;
    p.add("a", ParamKind::trainable, Tensor({2}, 1.0));
    p.add("stat", ParamKind::running_stat, Tensor({2}, 5.0));
    p.add("b", ParamKind::trainable, Tensor({2}, -1.0));
    AdamState st = AdamState::init(p);
    ParameterSet g = trainables_like(p);
    g.at("a")(0) = 1.0;
    g.at("b")(1) = -2.0;
    adam_step(p, g, st, 0.1);
    REQUIRE(p.at("stat")(0) == 5.0);
    REQUIRE(p.at("stat")(1) == 5.0);
    REQUIRE(p.at("a")(0) < 1.0);   // moved against the positive gradient
    REQUIRE(p.at("a")(1) == 1.0);  // zero gradient, zero moments: no motion
    REQUIRE(p.at("b")(1) > -1.0);  // moved against the negative gradient
}

TEST_CASE("adam: mismatched gradients are rejected", "[loss]") {
    ParameterSet p;
    p.add("w", ParamKind::trainable, Tensor({2}, 1.0));
    AdamState st = AdamState::init(p);

    ParameterSet wrong_name;
    wrong_name.add("zz", ParamKind::trainable, Tensor({2}));
    REQUIRE_THROWS_AS(adam_step(p, wrong_name, st, 0.01), ContractError);

    ParameterSet wrong_shape;
    wrong_shape.add("w", ParamKind::trainable, Tensor({3}));
    REQUIRE_THROWS_AS(adam_step(p, wrong_shape, st, 0.01), ContractError);

    ParameterSet extra;
    extra.add("w", ParamKind::trainable, Tensor({2}));
    extra.add("y", ParamKind::trainable, Tensor({2}));
    REQUIRE_THROWS_AS(adam_step(p, extra, st, 0.01), ContractError);

    REQUIRE_THROWS_AS(adam_step(p, trainables_like(p), st, -0.5), ContractError);
}

TEST_CASE("adam: deterministic across repeated identical runs", "[loss]") {
    auto run = [] {
        ParameterSet p;
        p.add("w", ParamKind::trainable, Tensor({4}, 0.5));
        AdamState st = AdamState::init(p);
        Rng rng(77);
        for (int i = 0; i < 25; ++i) {
            ParameterSet g = trainables_like(p);
            for (double& v : g.at("w").data) v = rng.gauss();
            adam_step(p, g, st, 0.01);
        }
        return p.at("w").data;
    };
    REQUIRE(run() == run());
}
