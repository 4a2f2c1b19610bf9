#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <string>

#include "fedicu/arch.hpp"
#include "fedicu/errors.hpp"
#include "fedicu/params.hpp"
#include "fedicu/tensor.hpp"

using namespace fedicu;

TEST_CASE("tensor construction, indexing and shape checks", "[tensor]") {
    Tensor t({2, 3}, 1.5);
    REQUIRE(t.rank() == 2);
    REQUIRE(t.numel() == 6);
    REQUIRE(t(1, 2) == 1.5);
    t(1, 2) = -4.0;
    REQUIRE(t.data[5] == -4.0);

    Tensor u({2, 3, 4});
    u(1, 2, 3) = 7.0;
    REQUIRE(u.data[1 * 12 + 2 * 4 + 3] == 7.0);

    REQUIRE(Tensor::full({3}, 2.0).data == std::vector<double>{2.0, 2.0, 2.0});
    REQUIRE(Tensor::zeros({2, 2}).numel() == 4);
    REQUIRE(t.same_shape(Tensor({2, 3})));
    REQUIRE_FALSE(t.same_shape(u));
    REQUIRE_THROWS_AS(Tensor({2, 0}), ConfigError);
}

TEST_CASE("finiteness guards", "[tensor]") {
    Tensor t({2, 2}, 0.5);
    REQUIRE(all_finite(t));
    REQUIRE_NOTHROW(require_finite(t, "here"));
    t(0, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_FALSE(all_finite(t));
    REQUIRE_THROWS_AS(require_finite(t, "here"), NumericError);
    std::vector<double> v{1.0, std::numeric_limits<double>::infinity()};
    REQUIRE_THROWS_AS(require_finite(v, "vec"), NumericError);
}

TEST_CASE("parameter set is ordered, named and kind-aware", "[tensor]") {
    ParameterSet p;
    p.add("a.W", ParamKind::trainable, Tensor({2, 2}, 1.0));
    p.add("a.stat", ParamKind::running_stat, Tensor({2}, 0.0));
    p.add("b.W", ParamKind::trainable, Tensor({3}, -1.0));

    REQUIRE(p.size() == 3);
    REQUIRE(p.has("a.W"));
    REQUIRE_FALSE(p.has("zz"));
    REQUIRE(p.at("b.W").numel() == 3);
    REQUIRE(p.entry(0).name == "a.W");
    REQUIRE(p.entry(1).kind == ParamKind::running_stat);
    REQUIRE(p.value_count(ParamKind::trainable) == 7);
    REQUIRE(p.value_count(ParamKind::running_stat) == 2);
    REQUIRE_THROWS_AS(p.add("a.W", ParamKind::trainable, Tensor({1})), ContractError);
    REQUIRE_THROWS_AS(p.at("missing"), ContractError);

    const ParameterSet& cp = p;
    REQUIRE(cp.at("a.W")(0, 0) == 1.0);

    ParameterSet g = trainables_like(p);
    REQUIRE(g.size() == 2);
    REQUIRE(g.entry(0).name == "a.W");
    REQUIRE(g.entry(1).name == "b.W");
    REQUIRE(g.at("a.W")(1, 1) == 0.0);
    REQUIRE(g.at("a.W").same_shape(p.at("a.W")));
}

TEST_CASE("same_spec compares names, kinds, shapes and order", "[tensor]") {
    auto make = [] {
        ParameterSet p;
        p.add("x", ParamKind::trainable, Tensor({2}));
        p.add("y", ParamKind::running_stat, Tensor({3}));
        return p;
    };
    ParameterSet a = make(), b = make();
    b.at("y")(0) = 9.0;  // values may differ
    REQUIRE(a.same_spec(b));

    ParameterSet c;
    c.add("x", ParamKind::trainable, Tensor({2}));
    REQUIRE_FALSE(a.same_spec(c));
    ParameterSet d;
    d.add("x", ParamKind::trainable, Tensor({2}));
    d.add("y", ParamKind::trainable, Tensor({3}));
    REQUIRE_FALSE(a.same_spec(d));
    ParameterSet e;
    e.add("y", ParamKind::running_stat, Tensor({3}));
    e.add("x", ParamKind::trainable, Tensor({2}));
    REQUIRE_FALSE(a.same_spec(e));
}

TEST_CASE("serialization round-trips bit for bit", "[tensor]") {
    ParameterSet p;
    Tensor t({2, 3});
    t(0, 0) = 0.1;
    t(0, 1) = -0.0;
    t(0, 2) = 1e-300;
    t(1, 0) = std::nextafter(1.0, 2.0);
    t(1, 1) = -1234.5678;
    t(1, 2) = 3.0;
    p.add("w", ParamKind::trainable, t);
    p.add("s", ParamKind::running_stat, Tensor({4}, 0.25));

    const std::string blob = serialize(p);
    ParameterSet q = deserialize(blob);
    REQUIRE(q.same_spec(p));
    for (std::size_t i = 0; i < p.size(); ++i) {
        REQUIRE(q.entry(i).values.data == p.entry(i).values.data);
    }
    REQUIRE(serialize(q) == blob);

    REQUIRE_THROWS_AS(deserialize(blob.substr(0, blob.size() - 1)), ConfigError);
    REQUIRE_THROWS_AS(deserialize(blob + "x"), ConfigError);
}

TEST_CASE("checksum reacts to any value change", "[tensor]") {
    ArchitectureSpec spec = build_architecture(ModelFamily::lstm, 8);
    ParameterSet p = init_parameters(spec, 1);
    const std::uint64_t base = checksum(p);
    REQUIRE(checksum(p) == base);

    ParameterSet q = init_parameters(spec, 1);
    REQUIRE(checksum(q) == base);

    q.at("head.fc2.b")(0) += 1e-15;
    REQUIRE(checksum(q) != base);

    ParameterSet r = init_parameters(spec, 2);
    REQUIRE(checksum(r) != base);
}

TEST_CASE("parameter files round-trip through disk", "[tensor]") {
    ArchitectureSpec spec = build_architecture(ModelFamily::gru, 8);
    ParameterSet p = init_parameters(spec, 3);
    const std::string path =
        (std::filesystem::temp_directory_path() / "fedicu_params_test.bin").string();
    save_params(p, path);
    ParameterSet q = load_params(path);
    REQUIRE(q.same_spec(p));
    REQUIRE(checksum(q) == checksum(p));
    std::remove(path.c_str());
    REQUIRE_THROWS_AS(load_params(path), ConfigError);
}
