#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "fedicu/errors.hpp"

namespace fedicu {

// Dense row-major array of 64-bit floats. Rank is dynamic; the models only
// ever use ranks 1-3.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0)
        : shape(std::move(dims)), data(checked_count(shape), fill) {}

    static Tensor zeros(std::vector<std::size_t> dims) { return Tensor(std::move(dims)); }

    static Tensor full(std::vector<std::size_t> dims, double v) {
        return Tensor(std::move(dims), v);
    }

    std::size_t numel() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }

    double& operator()(std::size_t i) { return data[i]; }
    const double& operator()(std::size_t i) const { return data[i]; }

    double& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    const double& operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) {
        return data[(i * shape[1] + j) * shape[2] + k];
    }
    const double& operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[(i * shape[1] + j) * shape[2] + k];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

private:
    static std::size_t checked_count(const std::vector<std::size_t>& dims) {
        std::size_t n = 1;
        for (std::size_t d : dims) {
            if (d == 0) throw ConfigError("tensor dimensions must be positive");
            n *= d;
        }
        return dims.empty() ? 0 : n;
    }
};

inline bool all_finite(const Tensor& t) {
    for (double v : t.data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline void require_finite(const Tensor& t, const std::string& where) {
    if (!all_finite(t)) throw NumericError("non-finite values in " + where);
}

inline void require_finite(const std::vector<double>& v, const std::string& where) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError("non-finite values in " + where);
    }
}

}  // namespace fedicu
