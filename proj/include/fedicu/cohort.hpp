#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/pipeline.hpp"
#include "fedicu/rng.hpp"

// Seeded synthetic patient generator. Negatives are stationary Gaussian noise
// around per-variable baselines with exponential inter-arrival times; positives
// add a monotone per-variable drift (and mild variance inflation) that ramps up
// over the final hours before the anchor, so windowed means carry the label.

namespace fedicu {

struct VariableModel {
    double mean = 0.0;
    double stddev = 1.0;
    double drift_sign = 1.0;  // direction of the positive-class drift
};

// Baselines are loosely ICU-typical; only their relative scale matters because
// the pipeline z-scores every column.
inline std::array<VariableModel, kNumVariables> default_variable_models() {
    return {{
        {85.0, 15.0, +1.0},   // heartrate
        {120.0, 20.0, -1.0},  // systolic_blood_pressure
        {65.0, 12.0, -1.0},   // diastolic_blood_pressure
        {80.0, 13.0, -1.0},   // mean_blood_pressure
        {19.0, 5.0, +1.0},    // respiratory_rate
        {37.0, 0.7, +1.0},    // temperature
        {96.5, 2.5, -1.0},    // peripheral_oxygen_saturation
        {3.1, 0.6, -1.0},     // albumin
        {25.0, 18.0, +1.0},   // blood_urea_nitrogen
        {1.4, 2.2, +1.0},     // bilirubin
        {2.0, 1.8, +1.0},     // lactate
        {24.0, 4.5, -1.0},    // bicarbonate
        {4.0, 3.5, +1.0},     // band_neutrophil
        {104.0, 6.0, +1.0},   // chloride
        {1.3, 1.1, +1.0},     // creatinine
        {140.0, 45.0, +1.0},  // glucose
        {10.5, 2.0, -1.0},    // hemoglobin
        {31.5, 5.5, -1.0},    // hematocrit
        {220.0, 110.0, -1.0}, // platelet
        {4.1, 0.6, +1.0},     // potassium
        {38.0, 18.0, +1.0},   // partial_thromboplastin_time
        {139.0, 5.0, +1.0},   // sodium
        {11.5, 5.5, +1.0},    // white_blood_cells
    }};
}

struct CohortConfig {
    std::size_t patients = 2000;
    double positive_fraction = 0.0975;
    std::uint64_t seed = 1;
    std::array<VariableModel, kNumVariables> variables = default_variable_models();
    double vital_rate_min = 0.5, vital_rate_max = 1.5;  // events per hour
    double lab_rate_min = 1.0, lab_rate_max = 2.0;      // events per 8 hours
    double duration_min = 48.0, duration_max = 72.0;    // hours of history
    double signal_strength = 1.0;   // drift magnitude in baseline stddevs
    double signal_hours = 48.0;     // ramp span before the anchor
    double variance_inflation = 0.5;  // extra noise scale for positives at full ramp
    std::vector<std::size_t> signal_variables;  // empty = all 23
    double skew = 0.0;  // client label-distribution skew for partitioning

    void validate() const {
        if (patients == 0) throw ConfigError("cohort: patients must be positive");
        if (positive_fraction <= 0.0 || positive_fraction >= 1.0)
            throw ConfigError("cohort: positive fraction must be in (0,1)");
        if (vital_rate_min <= 0.0 || vital_rate_max < vital_rate_min)
            throw ConfigError("cohort: vital sampling rates must be positive and ordered");
        if (lab_rate_min <= 0.0 || lab_rate_max < lab_rate_min)
            throw ConfigError("cohort: lab sampling rates must be positive and ordered");
        if (duration_min < 48.0 || duration_max < duration_min)
            throw ConfigError("cohort: duration must cover the largest window (48h)");
        if (signal_strength < 0.0) throw ConfigError("cohort: signal strength must be >= 0");
        if (signal_hours <= 0.0) throw ConfigError("cohort: signal hours must be positive");
        if (variance_inflation < 0.0) throw ConfigError("cohort: variance inflation must be >= 0");
        if (skew < 0.0) throw ConfigError("cohort: skew must be >= 0");
        for (std::size_t v : signal_variables)
            if (v >= kNumVariables) throw ConfigError("cohort: signal variable index out of range");
    }
};

inline std::size_t positive_count(const CohortConfig& config) {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(config.patients) * config.positive_fraction));
}

namespace detail {

inline std::string patient_id(std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%06zu", index);
    return buf;
}

}  // namespace detail

// Deterministic per patient: every record derives its own RNG stream from
// (seed, patient index), so generation order cannot affect content.
inline PatientRecord generate_patient(const CohortConfig& config, std::size_t index, int label) {
    Rng rng(mix_seed(config.seed, index));
    PatientRecord rec;
    rec.id = detail::patient_id(index);
    rec.label = label;

    std::array<bool, kNumVariables> carries_signal{};
    if (config.signal_variables.empty()) {
        carries_signal.fill(true);
    } else {
        for (std::size_t v : config.signal_variables) carries_signal[v] = true;
    }

    const double duration = rng.uniform(config.duration_min, config.duration_max);
    const double ramp_start = duration - config.signal_hours;
    double anchor = -1.0;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        const VariableModel& vm = config.variables[v];
        double mean_gap;
        if (is_vital(v)) {
            mean_gap = 1.0 / rng.uniform(config.vital_rate_min, config.vital_rate_max);
        } else {
            mean_gap = 8.0 / rng.uniform(config.lab_rate_min, config.lab_rate_max);
        }
        double t = rng.exponential(mean_gap);
        while (t <= duration) {
            double ramp = 0.0;
            if (label == 1 && carries_signal[v]) {
                ramp = std::clamp((t - ramp_start) / config.signal_hours, 0.0, 1.0);
            }
            const double noise_std = vm.stddev * (1.0 + config.variance_inflation * ramp);
            const double drift = vm.drift_sign * config.signal_strength * vm.stddev * ramp;
            rec.events[v].push_back({t, vm.mean + drift + rng.gauss() * noise_std});
            t += rng.exponential(mean_gap);
        }
        if (!rec.events[v].empty()) anchor = std::max(anchor, rec.events[v].back().time);
    }
    if (anchor < 0.0) {
        // Vanishingly unlikely, but a record must have at least one observation.
        rec.events[0].push_back({duration, config.variables[0].mean});
        anchor = duration;
    }
    rec.anchor = anchor;
    return rec;
}

// Labels are exact by construction: the first round(n * fraction) indices are
// positive. Downstream splits always stratify, so index order carries no bias.
inline std::vector<PatientRecord> generate_cohort(const CohortConfig& config) {
    config.validate();
    const std::size_t n_pos = positive_count(config);
    if (n_pos == 0 || n_pos >= config.patients)
        throw ConfigError("cohort: positive fraction leaves a class empty at this size");
    std::vector<PatientRecord> records;
    records.reserve(config.patients);
    for (std::size_t i = 0; i < config.patients; ++i) {
        records.push_back(generate_patient(config, i, i < n_pos ? 1 : 0));
    }
    return records;
}

namespace detail {

// Largest-remainder apportionment of `total` into parts proportional to
// `weights`; floors each part at `minimum` when feasible.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights,
                                          std::size_t minimum) {
    const std::size_t k = weights.size();
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::pair<double, std::size_t>> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = static_cast<double>(total) * weights[i] / wsum;
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        remainder[i] = {exact - std::floor(exact), i};
        assigned += counts[i];
    }
    std::stable_sort(remainder.begin(), remainder.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t j = 0; assigned < total; ++j, ++assigned) counts[remainder[j % k].second]++;
    if (minimum * k <= total) {
        for (std::size_t i = 0; i < k; ++i) {
            while (counts[i] < minimum) {
                const std::size_t donor = static_cast<std::size_t>(
                    std::max_element(counts.begin(), counts.end()) - counts.begin());
                --counts[donor];
                ++counts[i];
            }
        }
    }
    return counts;
}

}  // namespace detail

// Disjoint, exhaustive client shards. skew == 0 deals each class round-robin
// after a seeded shuffle (stratified, sizes equal +-1 per class). skew > 0
// draws per-client class proportions from Dirichlet(1/skew), giving non-IID
// label ratios while still guaranteeing each client one sample of each class.
inline std::vector<std::vector<std::size_t>> partition_clients(const std::vector<int>& labels,
                                                               std::size_t k, double skew,
                                                               std::uint64_t seed) {
    if (k == 0) throw ConfigError("partition: need at least one client");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
    const std::size_t minority = std::min(pos.size(), neg.size());
    if (k > minority)
        throw ConfigError("partition: more clients than minority-class records");

    std::vector<std::vector<std::size_t>> shards(k);
    std::array<std::vector<std::size_t>*, 2> classes = {&neg, &pos};
    for (std::size_t c = 0; c < classes.size(); ++c) {
        std::vector<std::size_t>& members = *classes[c];
        Rng rng(mix_seed(seed, 0xC1A55ULL, c));
        rng.shuffle(members);
        if (skew == 0.0) {
            for (std::size_t i = 0; i < members.size(); ++i)
                shards[i % k].push_back(members[i]);
        } else {
            std::vector<double> proportions(k);
            for (double& p : proportions) p = rng.gamma_shape(1.0 / skew);
            const auto counts = detail::apportion(members.size(), proportions, 1);
            std::size_t next = 0;
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < counts[i]; ++j) shards[i].push_back(members[next++]);
        }
    }
    for (auto& shard : shards) std::sort(shard.begin(), shard.end());
    return shards;
}

}  // namespace fedicu
