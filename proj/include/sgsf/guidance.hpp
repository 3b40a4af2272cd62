#pragma once

#include "sgsf/layers.hpp"
#include "sgsf/segmentation.hpp"

namespace sgsf {

/// Gated residual transform turning a segmentation feature tensor into a
/// modulation matrix: S = sigmoid(conv_g(T)) * conv_b(conv_a(T)) + T.
/// All convs are 1x1 and channel-preserving; zero-initialized parameters make
/// this the identity map.
template <class T>
struct SgftParams {
    Conv2dLayer<T> gate;   // inside the sigmoid
    Conv2dLayer<T> inner;  // conv_a
    Conv2dLayer<T> outer;  // conv_b
};

template <class T>
SgftParams<T> make_sgft(BuildCtx<T>& ctx, const std::string& prefix, int64_t c) {
    SgftParams<T> p;
    p.gate = make_conv(ctx, prefix + ".gate", c, c, 1);
    p.inner = make_conv(ctx, prefix + ".inner", c, c, 1);
    p.outer = make_conv(ctx, prefix + ".outer", c, c, 1);
    return p;
}

template <class T>
TensorT<T> sgft(const TensorT<T>& t, const SgftParams<T>& p) {
    return add(mul(sigmoid(p.gate(t)), p.outer(p.inner(t))), t);
}

/// Multi-scale modulation pyramid S_1..S_4. Spatial size halves and channel
/// width doubles per level, tracking the encoder/decoder stages.
template <class T>
struct SegGuidanceT {
    std::vector<TensorT<T>> s;  // s[0] full resolution .. s[3] 1/8 resolution
    float alpha = 0.5f;
};

using SegGuidance = SegGuidanceT<float>;

template <class T>
struct GuidanceParams {
    Conv2dLayer<T> ssfe;            // 1x1, 3 -> C1 (shallow feature extractor)
    std::vector<DownLayer<T>> downs;  // 3 downs between the 4 scales
    std::vector<SgftParams<T>> sgfts;
};

template <class T>
GuidanceParams<T> make_guidance(BuildCtx<T>& ctx, const std::string& prefix,
                                int64_t c1) {
    GuidanceParams<T> p;
    p.ssfe = make_conv(ctx, prefix + ".ssfe", c1, 3, 1);
    for (int64_t i = 0; i < 3; ++i)
        p.downs.push_back(make_down(ctx, prefix + ".down" + std::to_string(i + 2),
                                    c1 << i));
    for (int64_t i = 0; i < 4; ++i)
        p.sgfts.push_back(make_sgft(ctx, prefix + ".sgft" + std::to_string(i + 1),
                                    c1 << i));
    return p;
}

template <class T>
SegGuidanceT<T> build_pyramid(const TensorT<T>& i_seg, const GuidanceParams<T>& p,
                              float alpha = 0.5f) {
    SGSF_CHECK(i_seg.rank() == 4 && i_seg.dim(1) == 3,
               "build_pyramid expects [N,3,H,W], got " << shape_str(i_seg.shape()));
    SGSF_CHECK(i_seg.dim(2) % 16 == 0 && i_seg.dim(3) % 16 == 0,
               "build_pyramid: spatial extents " << i_seg.dim(2) << "x" << i_seg.dim(3)
                                                 << " must be multiples of 16");
    SegGuidanceT<T> g;
    g.alpha = alpha;
    TensorT<T> t = p.ssfe(i_seg);
    for (int64_t i = 0; i < 4; ++i) {
        if (i > 0) t = p.downs[i - 1](t);
        g.s.push_back(sgft(t, p.sgfts[i]));
    }
    return g;
}

}  // namespace sgsf
