#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/log.hpp"
#include "fedicu/tensor.hpp"

// Windowed feature extraction for irregular clinical series: window selection,
// per-channel mean resampling, interpolation/mean imputation, and z-score
// normalization with training-only statistics.

namespace fedicu {

inline constexpr std::size_t kNumVariables = 23;
inline constexpr std::size_t kVitalsCount = 7;   // hourly channel
inline constexpr std::size_t kLabsCount = 16;    // 8-hourly channel
inline constexpr double kVitalsBinHours = 1.0;
inline constexpr double kLabsBinHours = 8.0;

// Indices 0..6 are vitals, 7..22 are labs.
inline const std::array<std::string, kNumVariables>& variable_names() {
    static const std::array<std::string, kNumVariables> names = {
        "heartrate",
        "systolic_blood_pressure",
        "diastolic_blood_pressure",
        "mean_blood_pressure",
        "respiratory_rate",
        "temperature",
        "peripheral_oxygen_saturation",
        "albumin",
        "blood_urea_nitrogen",
        "bilirubin",
        "lactate",
        "bicarbonate",
        "band_neutrophil",
        "chloride",
        "creatinine",
        "glucose",
        "hemoglobin",
        "hematocrit",
        "platelet",
        "potassium",
        "partial_thromboplastin_time",
        "sodium",
        "white_blood_cells",
    };
    return names;
}

inline bool is_vital(std::size_t variable) { return variable < kVitalsCount; }

// -1 when the name is not one of the 23 known variables.
inline int variable_index(const std::string& name) {
    const auto& names = variable_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

struct Event {
    double time = 0.0;  // hours
    double value = 0.0;
};

struct PatientRecord {
    std::string id;
    int label = 0;  // 1 = died in ICU, 0 = discharged alive
    std::array<std::vector<Event>, kNumVariables> events;
    double anchor = 0.0;  // time of the last recorded observation

    void validate() const {
        if (label != 0 && label != 1) throw ConfigError("record " + id + ": label must be 0 or 1");
        bool any = false;
        double last = -std::numeric_limits<double>::infinity();
        for (const auto& series : events) {
            for (std::size_t i = 0; i < series.size(); ++i) {
                any = true;
                if (i > 0 && series[i].time < series[i - 1].time)
                    throw ConfigError("record " + id + ": timestamps must be non-decreasing");
                last = std::max(last, series[i].time);
            }
        }
        if (!any) throw ConfigError("record " + id + ": no observations");
        if (anchor != last)
            throw ConfigError("record " + id + ": anchor is not the last observation time");
    }
};

struct WindowedSample {
    Tensor vitals;  // [W, 7]
    Tensor labs;    // [W/8, 16]
    int label = 0;
    std::string patient_id;
};

struct NormalizationStats {
    std::array<double, kNumVariables> mean{};
    std::array<double, kNumVariables> stddev{};
    std::array<bool, kNumVariables> zero_std{};
    // Mean of observed bins in the fitting split; fills never-observed columns.
    std::array<double, kNumVariables> population_mean{};
    std::size_t sample_count = 0;
};

struct WindowedEvents {
    std::array<std::vector<Event>, kNumVariables> events;
    double anchor = 0.0;
};

struct RawMatrices {
    Tensor vitals;  // [W, 7], NaN marks an empty bin
    Tensor labs;    // [W/8, 16], NaN marks an empty bin
};

inline void require_window(int window_hours) {
    if (window_hours != 8 && window_hours != 16 && window_hours != 24 && window_hours != 48)
        throw ConfigError("window hours must be one of 8, 16, 24, 48");
}

// Keep only events with timestamp in (anchor - W, anchor], per variable.
inline WindowedEvents extract_window(const PatientRecord& record, int window_hours) {
    require_window(window_hours);
    WindowedEvents out;
    out.anchor = record.anchor;
    const double lo = record.anchor - window_hours;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        for (const Event& e : record.events[v]) {
            if (e.time > lo && e.time <= record.anchor) out.events[v].push_back(e);
        }
    }
    return out;
}

// Mean-aggregate each variable into half-open bins (start + b*delta,
// start + (b+1)*delta] where start = anchor - W, so the final bin always ends
// at the anchor. Empty bins are NaN.
inline RawMatrices resample(const WindowedEvents& windowed, int window_hours) {
    require_window(window_hours);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t vital_bins = static_cast<std::size_t>(window_hours);
    const std::size_t lab_bins = static_cast<std::size_t>(window_hours) / 8;
    RawMatrices out;
    out.vitals = Tensor({vital_bins, kVitalsCount}, nan);
    out.labs = Tensor({lab_bins, kLabsCount}, nan);
    const double start = windowed.anchor - window_hours;
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        const bool vital = is_vital(v);
        Tensor& m = vital ? out.vitals : out.labs;
        const std::size_t col = vital ? v : v - kVitalsCount;
        const std::size_t bins = vital ? vital_bins : lab_bins;
        const double delta = vital ? kVitalsBinHours : kLabsBinHours;
        for (std::size_t b = 0; b < bins; ++b) {
            const double bin_lo = start + static_cast<double>(b) * delta;
            const double bin_hi = start + static_cast<double>(b + 1) * delta;
            double sum = 0.0;
            std::size_t n = 0;
            for (const Event& e : windowed.events[v]) {
                if (e.time > bin_lo && e.time <= bin_hi) {
                    sum += e.value;
                    ++n;
                }
            }
            if (n > 0) m(b, col) = sum / static_cast<double>(n);
        }
    }
    return out;
}

// Fill gaps in place: interior gaps by linear interpolation between the
// nearest observed bins, edge gaps by nearest-observed extension, and fully
// empty columns with the variable's population mean.
inline void impute_column(Tensor& m, std::size_t col, double population_mean) {
    const std::size_t rows = m.dim(0);
    std::vector<std::size_t> seen;
    for (std::size_t r = 0; r < rows; ++r)
        if (!std::isnan(m(r, col))) seen.push_back(r);
    if (seen.empty()) {
        for (std::size_t r = 0; r < rows; ++r) m(r, col) = population_mean;
        return;
    }
    for (std::size_t r = 0; r < seen.front(); ++r) m(r, col) = m(seen.front(), col);
    for (std::size_t r = seen.back() + 1; r < rows; ++r) m(r, col) = m(seen.back(), col);
    for (std::size_t k = 0; k + 1 < seen.size(); ++k) {
        const std::size_t a = seen[k], b = seen[k + 1];
        const double va = m(a, col), vb = m(b, col);
        for (std::size_t r = a + 1; r < b; ++r) {
            const double t = static_cast<double>(r - a) / static_cast<double>(b - a);
            m(r, col) = va + (vb - va) * t;
        }
    }
}

inline void impute(RawMatrices& m, const std::array<double, kNumVariables>& population_means) {
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        if (is_vital(v))
            impute_column(m.vitals, v, population_means[v]);
        else
            impute_column(m.labs, v - kVitalsCount, population_means[v]);
    }
}

namespace detail {

inline const double* sample_cell(const WindowedSample& s, std::size_t row, std::size_t variable) {
    return is_vital(variable) ? &s.vitals(row, variable)
                              : &s.labs(row, variable - kVitalsCount);
}

inline std::size_t sample_rows(const WindowedSample& s, std::size_t variable) {
    return is_vital(variable) ? s.vitals.dim(0) : s.labs.dim(0);
}

}  // namespace detail

// Per-variable mean and population standard deviation over every cell of the
// fitting samples. Imputation population means default to the column means;
// Preprocessor::fit replaces them with observed-bin means.
inline NormalizationStats fit_normalization(const std::vector<WindowedSample>& samples) {
    if (samples.empty()) throw ConfigError("cannot fit normalization on an empty sample set");
    NormalizationStats stats;
    stats.sample_count = samples.size();
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& s : samples) {
            const std::size_t rows = detail::sample_rows(s, v);
            for (std::size_t r = 0; r < rows; ++r) sum += *detail::sample_cell(s, r, v);
            n += rows;
        }
        const double mean = sum / static_cast<double>(n);
        double sq = 0.0;
        for (const auto& s : samples) {
            const std::size_t rows = detail::sample_rows(s, v);
            for (std::size_t r = 0; r < rows; ++r) {
                const double d = *detail::sample_cell(s, r, v) - mean;
                sq += d * d;
            }
        }
        const double var = sq / static_cast<double>(n);
        stats.mean[v] = mean;
        stats.stddev[v] = std::sqrt(var);
        stats.zero_std[v] = stats.stddev[v] == 0.0;
        stats.population_mean[v] = mean;
        if (stats.zero_std[v])
            log_info("normalization: variable '" + variable_names()[v] +
                     "' has zero variance; its normalized column is all zeros");
    }
    return stats;
}

// Z-score with the fitting split's statistics; zero-variance columns map to 0.
inline void apply_normalization(const NormalizationStats& stats, WindowedSample& sample) {
    for (std::size_t v = 0; v < kNumVariables; ++v) {
        Tensor& m = is_vital(v) ? sample.vitals : sample.labs;
        const std::size_t col = is_vital(v) ? v : v - kVitalsCount;
        for (std::size_t r = 0; r < m.dim(0); ++r) {
            double& x = m(r, col);
            x = stats.zero_std[v] ? 0.0 : (x - stats.mean[v]) / stats.stddev[v];
        }
    }
}

// Fits window statistics on training records only and applies the frozen
// statistics to any record thereafter. Fit order: observed-bin population
// means first (they feed imputation), then normalization moments over the
// imputed training matrices.
class Preprocessor {
  public:
    Preprocessor() = default;

    void fit(const std::vector<const PatientRecord*>& training_records, int window_hours) {
        require_window(window_hours);
        if (training_records.empty())
            throw ConfigError("cannot fit the preprocessor on an empty training set");
        window_hours_ = window_hours;

        std::vector<RawMatrices> raw;
        raw.reserve(training_records.size());
        std::array<double, kNumVariables> sum{};
        std::array<std::size_t, kNumVariables> count{};
        for (const PatientRecord* rec : training_records) {
            raw.push_back(resample(extract_window(*rec, window_hours), window_hours));
            const RawMatrices& m = raw.back();
            for (std::size_t v = 0; v < kNumVariables; ++v) {
                const Tensor& t = is_vital(v) ? m.vitals : m.labs;
                const std::size_t col = is_vital(v) ? v : v - kVitalsCount;
                for (std::size_t r = 0; r < t.dim(0); ++r) {
                    const double x = t(r, col);
                    if (!std::isnan(x)) {
                        sum[v] += x;
                        ++count[v];
                    }
                }
            }
        }
        std::array<double, kNumVariables> population_mean{};
        for (std::size_t v = 0; v < kNumVariables; ++v) {
            if (count[v] == 0) {
                log_info("population mean: variable '" + variable_names()[v] +
                         "' never observed in the fitting split; defaulting to 0");
                population_mean[v] = 0.0;
            } else {
                population_mean[v] = sum[v] / static_cast<double>(count[v]);
            }
        }

        std::vector<WindowedSample> samples(training_records.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            impute(raw[i], population_mean);
            samples[i].vitals = std::move(raw[i].vitals);
            samples[i].labs = std::move(raw[i].labs);
            samples[i].label = training_records[i]->label;
            samples[i].patient_id = training_records[i]->id;
        }
        stats_ = fit_normalization(samples);
        stats_.population_mean = population_mean;
        fitted_ = true;
    }

    void fit(const std::vector<PatientRecord>& training_records, int window_hours) {
        std::vector<const PatientRecord*> ptrs;
        ptrs.reserve(training_records.size());
        for (const auto& r : training_records) ptrs.push_back(&r);
        fit(ptrs, window_hours);
    }

    WindowedSample transform(const PatientRecord& record) const {
        if (!fitted_) throw ContractError("preprocessor used before fit");
        RawMatrices m = resample(extract_window(record, window_hours_), window_hours_);
        impute(m, stats_.population_mean);
        WindowedSample s;
        s.vitals = std::move(m.vitals);
        s.labs = std::move(m.labs);
        s.label = record.label;
        s.patient_id = record.id;
        apply_normalization(stats_, s);
        require_finite(s.vitals, "windowed vitals for " + record.id);
        require_finite(s.labs, "windowed labs for " + record.id);
        return s;
    }

    std::vector<WindowedSample> transform(const std::vector<PatientRecord>& records) const {
        std::vector<WindowedSample> out;
        out.reserve(records.size());
        for (const auto& r : records) out.push_back(transform(r));
        return out;
    }

    std::vector<WindowedSample> transform(const std::vector<const PatientRecord*>& records) const {
        std::vector<WindowedSample> out;
        out.reserve(records.size());
        for (const PatientRecord* r : records) out.push_back(transform(*r));
        return out;
    }

    const NormalizationStats& stats() const {
        if (!fitted_) throw ContractError("preprocessor used before fit");
        return stats_;
    }
    int window_hours() const { return window_hours_; }
    bool fitted() const { return fitted_; }

    // Builds a preprocessor whose statistics are the sample-count-weighted
    // pooled moments of several already-fitted preprocessors. Pooled variance
    // comes from the second moments, so only aggregates cross the boundary.
    static Preprocessor pooled(const std::vector<const Preprocessor*>& parts,
                               const std::vector<std::size_t>& weights) {
        if (parts.empty() || parts.size() != weights.size())
            throw ConfigError("pooled preprocessor needs matching parts and weights");
        Preprocessor out;
        out.window_hours_ = parts.front()->window_hours_;
        double total = 0.0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            if (!parts[k]->fitted_) throw ContractError("pooled part is not fitted");
            if (parts[k]->window_hours_ != out.window_hours_)
                throw ConfigError("pooled parts use different windows");
            total += static_cast<double>(weights[k]);
        }
        if (total <= 0.0) throw ConfigError("pooled preprocessor needs positive total weight");
        for (std::size_t v = 0; v < kNumVariables; ++v) {
            double mean = 0.0, second = 0.0, pop = 0.0;
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const double w = static_cast<double>(weights[k]) / total;
                const NormalizationStats& s = parts[k]->stats_;
                mean += w * s.mean[v];
                second += w * (s.stddev[v] * s.stddev[v] + s.mean[v] * s.mean[v]);
                pop += w * s.population_mean[v];
            }
            out.stats_.mean[v] = mean;
            const double var = std::max(0.0, second - mean * mean);
            out.stats_.stddev[v] = std::sqrt(var);
            out.stats_.zero_std[v] = out.stats_.stddev[v] == 0.0;
            out.stats_.population_mean[v] = pop;
        }
        out.fitted_ = true;
        return out;
    }

  private:
    int window_hours_ = 0;
    NormalizationStats stats_;
    bool fitted_ = false;
};

}  // namespace fedicu
