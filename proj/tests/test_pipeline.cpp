#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "fedicu/pipeline.hpp"
#include "fedicu/rng.hpp"

using namespace fedicu;

namespace {

PatientRecord make_record(std::string id, int label,
                          const std::vector<std::tuple<std::size_t, double, double>>& rows) {
    PatientRecord r;
    r.id = std::move(id);
    r.label = label;
    double anchor = -1e300;
    for (const auto& [var, t, v] : rows) {
        r.events[var].push_back({t, v});
        anchor = std::max(anchor, t);
    }
    for (auto& series : r.events) {
        std::stable_sort(series.begin(), series.end(),
                         [](const Event& a, const Event& b) { return a.time < b.time; });
    }
    r.anchor = anchor;
    return r;
}

// Independent binning oracle: assigns each event to its bin by index
// arithmetic (ceil of the scaled offset) instead of the per-bin interval scan
// the implementation uses, accumulating sums in event-list order.
RawMatrices oracle_resample(const WindowedEvents& w, int window_hours) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    RawMatrices out;
    out.vitals = Tensor({static_cast<std::size_t>(window_hours), kVitalsCount}, nan);
    out.labs = Tensor({static_cast<std::size_t>(window_hours) / 8, kLabsCount}, nan);
    const double start = w.anchor - window_hours;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        Tensor& m = is_vital(v) ? out.vitals : out.labs;
        const std::size_t col = is_vital(v) ? v : v - kVitalsCount;
        const double delta = is_vital(v) ? 1.0 : 8.0;
        std::vector<double> sums(m.dim(0), 0.0);
        std::vector<std::size_t> counts(m.dim(0), 0);
        for (const Event& e : w.events[v]) {
            const double off = (e.time - start) / delta;
            // event belongs to bin b iff b*delta < t-start <= (b+1)*delta
            const auto b = static_cast<std::size_t>(std::ceil(off)) - 1;
            if (b >= m.dim(0)) continue;  // outside the window (never after extract)
            sums[b] += e.value;
            ++counts[b];
        }
        for (std::size_t b = 0; b < m.dim(0); ++b) {
            if (counts[b] > 0) m(b, col) = sums[b] / static_cast<double>(counts[b]);
        }
    }
    return out;
}

PatientRecord random_sparse_record(std::uint64_t seed, std::string id) {
    Rng rng(seed);
    std::vector<std::tuple<std::size_t, double, double>> rows;
    const double duration = rng.uniform(48.0, 80.0);
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        if (rng.uniform01() < 0.15) continue;  // leave some variables empty
        double t = rng.exponential(is_vital(v) ? 1.0 : 6.0);
        while (t <= duration) {
            rows.emplace_back(v, t, rng.gauss(10.0 * static_cast<double>(v + 1), 3.0));
            t += 1e-3 + rng.exponential(is_vital(v) ? 1.0 : 6.0);
        }
    }
    if (rows.empty()) rows.emplace_back(0, duration, 80.0);
    return make_record(std::move(id), seed % 7 == 0 ? 1 : 0, rows);
}

bool identical(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const bool na = std::isnan(a.data[i]), nb = std::isnan(b.data[i]);
        if (na != nb) return false;
        if (!na && a.data[i] != b.data[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("variable table: 7 vitals, 16 labs, exact names resolvable", "[pipeline]") {
    REQUIRE(variable_names().size() == 23);
    REQUIRE(variable_index("heartrate") == 0);
    REQUIRE(is_vital(static_cast<std::size_t>(variable_index("temperature"))));
    REQUIRE_FALSE(is_vital(static_cast<std::size_t>(variable_index("lactate"))));
    REQUIRE(variable_index("white_blood_cells") == 22);
    REQUIRE(variable_index("not_a_variable") == -1);
    std::size_t vitals = 0;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        if (is_vital(v)) ++vitals;
    }
    REQUIRE(vitals == kVitalsCount);
}

TEST_CASE("record validation enforces label, order, anchor and non-emptiness", "[pipeline]") {
    PatientRecord ok = make_record("p1", 0, {{0, 1.0, 80.0}, {0, 2.0, 82.0}});
    REQUIRE_NOTHROW(ok.validate());

    PatientRecord bad_label = ok;
    bad_label.label = 2;
    REQUIRE_THROWS_AS(bad_label.validate(), ConfigError);

    PatientRecord unsorted = ok;
    std::swap(unsorted.events[0][0], unsorted.events[0][1]);
    REQUIRE_THROWS_AS(unsorted.validate(), ConfigError);

    PatientRecord empty;
    empty.id = "p2";
    REQUIRE_THROWS_AS(empty.validate(), ConfigError);

    PatientRecord bad_anchor = ok;
    bad_anchor.anchor = 5.0;
    REQUIRE_THROWS_AS(bad_anchor.validate(), ConfigError);
}

TEST_CASE("window keeps (anchor-W, anchor] and drops the open edge", "[pipeline]") {
    PatientRecord r = make_record("p1", 0, {{0, 1.0, 10.0}, {0, 5.0, 20.0}, {0, 9.0, 30.0}});
    REQUIRE(r.anchor == 9.0);
    WindowedEvents w = extract_window(r, 8);
    REQUIRE(w.events[0].size() == 2);  // t=1 sits on the open boundary of (1, 9]
    REQUIRE(w.events[0][0].time == 5.0);
    REQUIRE(w.events[0][1].time == 9.0);

    WindowedEvents all = extract_window(r, 16);
    REQUIRE(all.events[0].size() == 3);  // full history inside the window: identity

    REQUIRE_THROWS_AS(extract_window(r, 12), ConfigError);
}

TEST_CASE("window matches a brute-force filter on random records", "[pipeline]") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        PatientRecord r = random_sparse_record(seed, "p");
        for (int w : {8, 16, 24, 48}) {
            WindowedEvents got = extract_window(r, w);
            for (std::size_t v = 0; v < kNumVariables; ++v) {
                std::vector<Event> expect;
                for (const Event& e : r.events[v]) {
                    if (e.time > r.anchor - w && e.time <= r.anchor) expect.push_back(e);
                }
                REQUIRE(got.events[v].size() == expect.size());
                for (std::size_t i = 0; i < expect.size(); ++i) {
                    REQUIRE(got.events[v][i].time == expect[i].time);
                    REQUIRE(got.events[v][i].value == expect[i].value);
                }
            }
        }
    }
}

TEST_CASE("resampling: mean aggregation into end-anchored hourly bins", "[pipeline]") {
    PatientRecord r = make_record("p1", 0, {{0, 8.2, 10.0}, {0, 8.9, 20.0}, {0, 9.0, 30.0}});
    // anchor 9, W=8: last vitals bin covers (8, 9]; mean of 10, 20, 30
    RawMatrices m = resample(extract_window(r, 8), 8);
    REQUIRE(m.vitals(7, 0) == 20.0);
    for (std::size_t b = 0; b < 7; ++b) REQUIRE(std::isnan(m.vitals(b, 0)));

    PatientRecord two = make_record("p2", 0, {{0, 8.2, 10.0}, {0, 8.9, 20.0}, {1, 9.0, 99.0}});
    RawMatrices m2 = resample(extract_window(two, 8), 8);
    REQUIRE(m2.vitals(7, 0) == 15.0);  // (10+20)/2 in the final (8,9] bin
    REQUIRE(m2.vitals(7, 1) == 99.0);
}

TEST_CASE("resampling: one lab event anywhere in a bin fixes the bin value", "[pipeline]") {
    const std::size_t lab = kVitalsCount + 3;
    PatientRecord r = make_record("p1", 0, {{lab, 2.5, 1.7}, {0, 16.0, 50.0}});
    RawMatrices m = resample(extract_window(r, 16), 16);
    // anchor 16, W=16: lab bins (0,8] and (8,16]; the event at 2.5 fills bin 0
    REQUIRE(m.labs(0, 3) == 1.7);
    REQUIRE(std::isnan(m.labs(1, 3)));
}

TEST_CASE("resampling matches the index-arithmetic oracle exactly", "[pipeline]") {
    for (std::uint64_t seed = 31; seed <= 80; ++seed) {
        PatientRecord r = random_sparse_record(seed, "p");
        for (int w : {8, 24, 48}) {
            WindowedEvents we = extract_window(r, w);
            RawMatrices got = resample(we, w);
            RawMatrices expect = oracle_resample(we, w);
            REQUIRE(identical(got.vitals, expect.vitals));
            REQUIRE(identical(got.labs, expect.labs));
        }
    }
}

TEST_CASE("imputation: linear midpoint, edge extension, population fill", "[pipeline]") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Tensor col({3, 1}, nan);
    col(0, 0) = 1.0;
    col(2, 0) = 3.0;
    impute_column(col, 0, 99.0);
    REQUIRE(col(0, 0) == 1.0);
    REQUIRE(col(1, 0) == 2.0);
    REQUIRE(col(2, 0) == 3.0);

    Tensor lead({3, 1}, nan);
    lead(2, 0) = 5.0;
    impute_column(lead, 0, 99.0);
    REQUIRE(lead(0, 0) == 5.0);
    REQUIRE(lead(1, 0) == 5.0);
    REQUIRE(lead(2, 0) == 5.0);

    Tensor empty({4, 1}, nan);
    impute_column(empty, 0, 7.4);
    for (std::size_t r = 0; r < 4; ++r) REQUIRE(empty(r, 0) == 7.4);

    Tensor trail({4, 1}, nan);
    trail(0, 0) = 2.0;
    trail(1, 0) = 4.0;
    impute_column(trail, 0, 99.0);
    REQUIRE(trail(2, 0) == 4.0);  // trailing extension of the last observation
    REQUIRE(trail(3, 0) == 4.0);
}

TEST_CASE("normalization: frozen arithmetic and degenerate columns", "[pipeline]") {
    // two single-row "lab" samples so each variable column has two cells
    auto sample_with = [](double a) {
        WindowedSample s;
        s.vitals = Tensor({1, kVitalsCount}, a);
        s.labs = Tensor({1, kLabsCount}, 5.0);  // constant labs: zero variance
        return s;
    };
    std::vector<WindowedSample> train{sample_with(3.0), sample_with(7.0)};
    NormalizationStats stats = fit_normalization(train);
    // vitals columns: mean 5, population std 2
    REQUIRE(stats.mean[0] == 5.0);
    REQUIRE(stats.stddev[0] == 2.0);
    REQUIRE_FALSE(stats.zero_std[0]);
    // labs columns constant: flagged
    REQUIRE(stats.zero_std[kVitalsCount]);

    WindowedSample test = sample_with(9.0);
    apply_normalization(stats, test);
    REQUIRE(test.vitals(0, 0) == 2.0);      // (9-5)/2
    REQUIRE(test.labs(0, 0) == 0.0);        // zero-variance column maps to 0
    REQUIRE_THROWS_AS(fit_normalization({}), ConfigError);
}

TEST_CASE("normalized training columns have mean ~0 and std ~1", "[pipeline]") {
    std::vector<PatientRecord> records;
    for (std::uint64_t s = 101; s <= 140; ++s) {
        records.push_back(random_sparse_record(s, "p" + std::to_string(s)));
    }
    Preprocessor prep;
    prep.fit(records, 24);
    std::vector<WindowedSample> out = prep.transform(records);
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        double sum = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (const auto& s : out) {
            const Tensor& m = is_vital(v) ? s.vitals : s.labs;
            const std::size_t col = is_vital(v) ? v : v - kVitalsCount;
            for (std::size_t r = 0; r < m.dim(0); ++r) {
                sum += m(r, col);
                sq += m(r, col) * m(r, col);
                ++n;
            }
        }
        const double mean = sum / static_cast<double>(n);
        if (prep.stats().zero_std[v]) continue;
        REQUIRE(std::abs(mean) < 1e-10);
        REQUIRE(std::sqrt(sq / static_cast<double>(n) - mean * mean) ==
                Catch::Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("shape law and totality hold for every window on sparse input", "[pipeline]") {
    std::vector<PatientRecord> records;
    for (std::uint64_t s = 201; s <= 230; ++s) {
        records.push_back(random_sparse_record(s, "p" + std::to_string(s)));
    }
    for (int w : {8, 16, 24, 48}) {
        Preprocessor prep;
        prep.fit(records, w);
        for (const auto& r : records) {
            WindowedSample s = prep.transform(r);
            REQUIRE(s.vitals.dim(0) == static_cast<std::size_t>(w));
            REQUIRE(s.vitals.dim(1) == kVitalsCount);
            REQUIRE(s.labs.dim(0) == static_cast<std::size_t>(w) / 8);
            REQUIRE(s.labs.dim(1) == kLabsCount);
            REQUIRE(all_finite(s.vitals));
            REQUIRE(all_finite(s.labs));
        }
    }
}

TEST_CASE("fit statistics never change when transforming unseen data", "[pipeline]") {
    std::vector<PatientRecord> train, test;
    for (std::uint64_t s = 301; s <= 320; ++s) train.push_back(random_sparse_record(s, "tr"));
    for (std::uint64_t s = 401; s <= 420; ++s) test.push_back(random_sparse_record(s, "te"));
    Preprocessor prep;
    prep.fit(train, 8);
    const NormalizationStats before = prep.stats();
    prep.transform(test);
    const NormalizationStats& after = prep.stats();
    REQUIRE(before.mean == after.mean);
    REQUIRE(before.stddev == after.stddev);
    REQUIRE(before.population_mean == after.population_mean);
    REQUIRE(before.zero_std == after.zero_std);
}

TEST_CASE("event stream order does not affect the output sample", "[pipeline]") {
    // same events fed in a different arrival order; per-variable lists end up
    // sorted, so the pipeline output must be bit-identical
    std::vector<std::tuple<std::size_t, double, double>> rows;
    Rng rng(55);
    for (int i = 0; i < 200; ++i) {
        rows.emplace_back(static_cast<std::size_t>(rng.below(kNumVariables)),
                          rng.uniform(0.0, 60.0), rng.gauss(50.0, 10.0));
    }
    std::vector<std::tuple<std::size_t, double, double>> shuffled = rows;
    rng.shuffle(shuffled);

    PatientRecord a = make_record("p", 0, rows);
    PatientRecord b = make_record("p", 0, shuffled);
    std::vector<PatientRecord> train{a};
    Preprocessor prep;
    prep.fit(train, 48);
    WindowedSample sa = prep.transform(a);
    WindowedSample sb = prep.transform(b);
    REQUIRE(sa.vitals.data == sb.vitals.data);
    REQUIRE(sa.labs.data == sb.labs.data);
}

TEST_CASE("preprocessor rejects misuse", "[pipeline]") {
    Preprocessor prep;
    REQUIRE_FALSE(prep.fitted());
    PatientRecord r = make_record("p", 0, {{0, 50.0, 80.0}});
    REQUIRE_THROWS_AS(prep.transform(r), ContractError);
    REQUIRE_THROWS_AS(prep.stats(), ContractError);
    std::vector<PatientRecord> none;
    REQUIRE_THROWS_AS(prep.fit(none, 8), ConfigError);
    std::vector<PatientRecord> one{r};
    REQUIRE_THROWS_AS(prep.fit(one, 9), ConfigError);
}

TEST_CASE("never-observed variables fall back to a usable population mean", "[pipeline]") {
    // only heartrate is ever observed; the other 22 columns are fully empty
    std::vector<PatientRecord> train{make_record("a", 0, {{0, 49.0, 70.0}, {0, 50.0, 90.0}}),
                                     make_record("b", 1, {{0, 48.5, 60.0}, {0, 50.0, 65.0}})};
    Preprocessor prep;
    prep.fit(train, 8);
    for (std::size_t v = 1; v < kNumVariables; ++v) {
        REQUIRE(prep.stats().population_mean[v] == 0.0);
        REQUIRE(prep.stats().zero_std[v]);
    }
    WindowedSample s = prep.transform(train[0]);
    REQUIRE(all_finite(s.vitals));
    REQUIRE(all_finite(s.labs));
}

TEST_CASE("pooled statistics equal the weighted moment combination", "[pipeline]") {
    std::vector<PatientRecord> part_a, part_b;
    for (std::uint64_t s = 501; s <= 515; ++s) part_a.push_back(random_sparse_record(s, "a"));
    for (std::uint64_t s = 601; s <= 625; ++s) part_b.push_back(random_sparse_record(s, "b"));
    Preprocessor pa, pb;
    pa.fit(part_a, 8);
    pb.fit(part_b, 8);

    Preprocessor pooled = Preprocessor::pooled({&pa, &pb}, {15, 25});
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        const double wa = 15.0 / 40.0, wb = 25.0 / 40.0;
        const double mean = wa * pa.stats().mean[v] + wb * pb.stats().mean[v];
        const double second =
            wa * (pa.stats().stddev[v] * pa.stats().stddev[v] +
                  pa.stats().mean[v] * pa.stats().mean[v]) +
            wb * (pb.stats().stddev[v] * pb.stats().stddev[v] +
                  pb.stats().mean[v] * pb.stats().mean[v]);
        REQUIRE(pooled.stats().mean[v] == Catch::Approx(mean).margin(1e-12));
        REQUIRE(pooled.stats().stddev[v] ==
                Catch::Approx(std::sqrt(std::max(0.0, second - mean * mean))).margin(1e-12));
    }

    // single-part pooling reproduces that part's statistics
    Preprocessor solo = Preprocessor::pooled({&pa}, {15});
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        REQUIRE(solo.stats().mean[v] == Catch::Approx(pa.stats().mean[v]).margin(1e-12));
        REQUIRE(solo.stats().stddev[v] ==
                Catch::Approx(pa.stats().stddev[v]).margin(1e-10));
    }

    REQUIRE_THROWS_AS(Preprocessor::pooled({}, {}), ConfigError);
    REQUIRE_THROWS_AS(Preprocessor::pooled({&pa}, {0}), ConfigError);
    Preprocessor unfitted;
    REQUIRE_THROWS_AS(Preprocessor::pooled({&unfitted}, {3}), ContractError);
}
