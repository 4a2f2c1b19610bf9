#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "fedicu/errors.hpp"
#include "fedicu/params.hpp"

namespace fedicu {

// Adam state: one first/second moment pair per trainable entry, in entry
// order. Running statistics get no moments and are never touched by steps.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const ParameterSet& params) {
        AdamState st;
        for (const auto& e : params) {
            if (e.kind != ParamKind::trainable) continue;
            st.m.push_back(Tensor::zeros(e.values.shape));
            st.v.push_back(Tensor::zeros(e.values.shape));
        }
        return st;
    }
};

// Bias-corrected Adam update, in place. `grads` must hold exactly the
// trainable entries of `params`, in order (as produced by the backward pass).
inline void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state,
                      double learning_rate) {
    if (learning_rate < 0.0) throw ContractError("adam_step: negative learning rate");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    std::size_t gi = 0;
    for (auto& e : params) {
        if (e.kind != ParamKind::trainable) continue;
        if (gi >= grads.size()) throw ContractError("adam_step: gradient count mismatch");
        const auto& ge = grads.entry(gi);
        if (ge.name != e.name || !ge.values.same_shape(e.values))
            throw ContractError("adam_step: gradient mismatch for " + e.name);
        if (gi >= state.m.size() || !state.m[gi].same_shape(e.values))
            throw ContractError("adam_step: state mismatch for " + e.name);

        double* w = e.values.data.data();
        const double* g = ge.values.data.data();
        double* m = state.m[gi].data.data();
        double* v = state.v[gi].data.data();
        const std::size_t n = e.values.numel();
        for (std::size_t j = 0; j < n; ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= learning_rate * mhat / (std::sqrt(vhat) + state.eps);
        }
        ++gi;
    }
    if (gi != grads.size()) throw ContractError("adam_step: gradient count mismatch");
}

}  // namespace fedicu
