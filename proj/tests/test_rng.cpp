#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <vector>

#include "fedicu/rng.hpp"

using namespace fedicu;

TEST_CASE("same seed reproduces the full draw sequence", "[rng]") {
    Rng a(42), b(42);
    for (int i = 0; i < 200; ++i) {
        REQUIRE(a.next() == b.next());
    }
    Rng c(42), d(42);
    for (int i = 0; i < 200; ++i) {
        REQUIRE(c.uniform01() == d.uniform01());
        REQUIRE(c.gauss() == d.gauss());
    }
}

TEST_CASE("different seeds diverge", "[rng]") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) {
        if (a.next() == b.next()) ++same;
    }
    REQUIRE(same == 0);
}

TEST_CASE("uniform01 stays in [0,1) and covers the range", "[rng]") {
    Rng rng(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    REQUIRE(lo < 0.01);
    REQUIRE(hi > 0.99);
}

TEST_CASE("uniform(lo,hi) respects its bounds", "[rng]") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-3.0, 5.0);
        REQUIRE(v >= -3.0);
        REQUIRE(v < 5.0);
    }
}

TEST_CASE("gauss moments are standard normal", "[rng]") {
    Rng rng(5);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gauss();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("exponential mean matches the requested mean", "[rng]") {
    Rng rng(9);
    const int n = 200000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double e = rng.exponential(2.0);
        REQUIRE(e >= 0.0);
        sum += e;
    }
    REQUIRE(std::abs(sum / n - 2.0) < 0.05);
}

TEST_CASE("gamma_shape mean and variance equal alpha", "[rng]") {
    for (double alpha : {0.25, 0.5, 1.0, 2.5, 8.0}) {
        Rng rng(static_cast<std::uint64_t>(alpha * 100) + 3);
        const int n = 100000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = rng.gamma_shape(alpha);
            REQUIRE(g >= 0.0);
            sum += g;
            sq += g * g;
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        REQUIRE(std::abs(mean - alpha) < 0.05 * std::max(1.0, alpha));
        REQUIRE(std::abs(var - alpha) < 0.12 * std::max(1.0, alpha));
    }
}

TEST_CASE("below is unbiased across residues and in range", "[rng]") {
    Rng rng(13);
    const std::uint64_t n = 10;
    std::vector<int> counts(n, 0);
    for (int i = 0; i < 100000; ++i) {
        const std::uint64_t v = rng.below(n);
        REQUIRE(v < n);
        ++counts[static_cast<std::size_t>(v)];
    }
    for (int c : counts) {
        REQUIRE(c > 9300);
        REQUIRE(c < 10700);
    }
    REQUIRE(rng.below(0) == 0);
    REQUIRE(rng.below(1) == 0);
}

TEST_CASE("shuffle is a permutation and is seed-stable", "[rng]") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(21), b(21);
    a.shuffle(v);
    b.shuffle(w);
    REQUIRE(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(100);
    std::iota(expect.begin(), expect.end(), 0);
    REQUIRE(sorted == expect);
    REQUIRE(v != expect);  // 100! permutations; identity is astronomically unlikely
}

TEST_CASE("mix_seed separates streams", "[rng]") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 30; ++a) {
        for (std::uint64_t b = 0; b < 30; ++b) {
            seen.insert(mix_seed(a, b));
        }
    }
    REQUIRE(seen.size() == 900);
    REQUIRE(mix_seed(1, 2) != mix_seed(2, 1));
    REQUIRE(mix_seed(1, 2, 3) == mix_seed(mix_seed(1, 2), 3));
    REQUIRE(mix_seed(1, 2, 3, 4) == mix_seed(mix_seed(1, 2, 3), 4));
}

TEST_CASE("hash_str is stable and string-sensitive", "[rng]") {
    REQUIRE(hash_str("") == 14695981039346656037ULL);
    REQUIRE(hash_str("abc") == hash_str("abc"));
    REQUIRE(hash_str("abc") != hash_str("abd"));
    REQUIRE(hash_str("abc") != hash_str("ab"));
}
