#pragma once

#include <string>

#include "sgsf/ops.hpp"

namespace sgsf {

/// Shared context for building parameterized layers: the registry that owns
/// every tensor, the init RNG, and the list of output-projection parameter
/// names (the set zeroed for identity warm starts).
template <class T>
struct BuildCtx {
    ParamRegistryT<T>& reg;
    Rng& rng;
    std::vector<std::string>* out_projections = nullptr;

    void mark_out_projection(const std::string& name) {
        if (out_projections) out_projections->push_back(name);
    }
};

template <class T>
struct Conv2dLayer {
    TensorT<T> w;  // [Co,Ci,kh,kw]
    TensorT<T> b;  // [Co] or undefined
    Pad pad = Pad::Zeros;
    int64_t groups = 1;

    TensorT<T> operator()(const TensorT<T>& x) const {
        return conv2d(x, w, b, pad, groups);
    }
};

template <class T>
Conv2dLayer<T> make_conv(BuildCtx<T>& ctx, const std::string& prefix, int64_t co,
                         int64_t ci, int64_t k, int64_t groups = 1,
                         bool bias = true, bool out_projection = false) {
    Conv2dLayer<T> layer;
    layer.groups = groups;
    const int64_t ci_g = ci / groups;
    // He init; output projections start small so deep residual stacks open
    // near the identity while every parameter still receives gradient.
    double stddev = std::sqrt(2.0 / static_cast<double>(ci_g * k * k));
    if (out_projection) stddev *= 0.05;
    TensorT<T> w = TensorT<T>::randn({co, ci_g, k, k}, ctx.rng, static_cast<T>(stddev));
    layer.w = ctx.reg.add(prefix + ".w", w);
    if (bias) layer.b = ctx.reg.add(prefix + ".b", TensorT<T>::zeros({co}));
    if (out_projection) {
        ctx.mark_out_projection(prefix + ".w");
        if (bias) ctx.mark_out_projection(prefix + ".b");
    }
    return layer;
}

template <class T>
struct LayerNormLayer {
    TensorT<T> gamma, beta;
    T eps = T(1e-5);

    TensorT<T> operator()(const TensorT<T>& x) const {
        return layernorm(x, gamma, beta, eps);
    }
};

template <class T>
LayerNormLayer<T> make_layernorm(BuildCtx<T>& ctx, const std::string& prefix, int64_t c) {
    LayerNormLayer<T> layer;
    layer.gamma = ctx.reg.add(prefix + ".gamma", TensorT<T>::ones({c}));
    layer.beta = ctx.reg.add(prefix + ".beta", TensorT<T>::zeros({c}));
    return layer;
}

/// Downsample: pixel-unshuffle then 1x1 conv, [N,C,H,W] -> [N,2C,H/2,W/2].
template <class T>
struct DownLayer {
    Conv2dLayer<T> conv;  // 4C -> 2C
    TensorT<T> operator()(const TensorT<T>& x) const {
        return conv(pixel_unshuffle(x));
    }
};

template <class T>
DownLayer<T> make_down(BuildCtx<T>& ctx, const std::string& prefix, int64_t c) {
    return DownLayer<T>{make_conv(ctx, prefix, 2 * c, 4 * c, 1)};
}

/// Upsample: 1x1 conv to 2C then pixel-shuffle, [N,C,H,W] -> [N,C/2,2H,2W].
template <class T>
struct UpLayer {
    Conv2dLayer<T> conv;  // C -> 2C
    TensorT<T> operator()(const TensorT<T>& x) const {
        return pixel_shuffle(conv(x));
    }
};

template <class T>
UpLayer<T> make_up(BuildCtx<T>& ctx, const std::string& prefix, int64_t c) {
    return UpLayer<T>{make_conv(ctx, prefix, 2 * c, c, 1)};
}

}  // namespace sgsf
