#pragma once

#include "sgsf/tensor.hpp"

namespace sgsf {

/// Triangular cyclical learning rate: lr(0) = hi, lr(period/2) = lo,
/// lr(period) = hi again.
inline double cyclic_lr(int64_t step, double lo, double hi, int64_t period) {
    SGSF_CHECK(period > 0 && period % 2 == 0, "cyclic_lr period must be positive and even");
    SGSF_CHECK(lo <= hi, "cyclic_lr expects lo <= hi");
    const int64_t phase = step % period;
    const int64_t half = period / 2;
    const double frac = phase <= half
                            ? static_cast<double>(phase) / static_cast<double>(half)
                            : static_cast<double>(period - phase) / static_cast<double>(half);
    // Convex form: exact hi at frac=0 and exact lo at frac=1.
    return hi * (1.0 - frac) + lo * frac;
}

/// Textbook Adam with bias correction. Moments are stored per registered
/// parameter, in registration order.
template <class T>
struct AdamStateT {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t step = 0;
    std::vector<std::vector<T>> m, v;

    template <class U>
    static AdamStateT make(const ParamRegistryT<U>& reg) {
        AdamStateT st;
        for (const auto& p : reg.all()) {
            st.m.emplace_back(p.tensor.numel(), T(0));
            st.v.emplace_back(p.tensor.numel(), T(0));
        }
        return st;
    }
};

using AdamState = AdamStateT<float>;

template <class T>
void adam_step(ParamRegistryT<T>& reg, AdamStateT<T>& state, double lr) {
    SGSF_CHECK(state.m.size() == reg.size(), "optimizer state size mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t pi = 0; pi < reg.size(); ++pi) {
        TensorT<T> t = reg.all()[pi].tensor;
        const auto& g = t.grad();
        auto& m = state.m[pi];
        auto& v = state.v[pi];
        const int64_t n = t.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
            const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * gi;
            const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            t.ptr()[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

}  // namespace sgsf
