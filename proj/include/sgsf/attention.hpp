#pragma once

#include "sgsf/layers.hpp"

namespace sgsf {

struct AttnConfig {
    int64_t heads = 1;
    double sparsity_ratio = 0.67;  // rho; k_th = max(1, ceil(rho * tokens))
};

inline int64_t topk_count(double rho, int64_t tokens) {
    const int64_t k = static_cast<int64_t>(std::ceil(rho * static_cast<double>(tokens)));
    return std::max<int64_t>(1, std::min(k, tokens));
}

enum class AttnKind {
    Sparse,     // SGSA / l-SGSA: top-k masked, guidance-modulated
    SelfDense,  // dense attention with the self-derived modulation feature
    Plain       // latent-stage dense attention, no modulation
};

/// Q/K/V come from a 1x1 conv to 3C followed by a 3x3 depth-wise conv; heads
/// are merged back by a 1x1 conv. The per-head temperature scales the
/// L2-normalized channel-token logits.
template <class T>
struct AttentionParams {
    Conv2dLayer<T> qkv_pw;   // 1x1, C -> 3C
    Conv2dLayer<T> qkv_dw;   // 3x3 depth-wise on 3C
    Conv2dLayer<T> out;      // 1x1, C -> C (head merge)
    Conv2dLayer<T> sprime;   // SelfDense only: 3x3, C -> C
    TensorT<T> temperature;  // [heads]
    AttnConfig cfg;
    AttnKind kind = AttnKind::Sparse;
};

template <class T>
AttentionParams<T> make_attention(BuildCtx<T>& ctx, const std::string& prefix,
                                  int64_t c, const AttnConfig& cfg, AttnKind kind) {
    SGSF_CHECK(cfg.heads >= 1 && c % cfg.heads == 0,
               prefix << ": channel count " << c << " not divisible by heads "
                      << cfg.heads);
    AttentionParams<T> p;
    p.cfg = cfg;
    p.kind = kind;
    p.qkv_pw = make_conv(ctx, prefix + ".qkv_pw", 3 * c, c, 1);
    p.qkv_dw = make_conv(ctx, prefix + ".qkv_dw", 3 * c, 3 * c, 3, /*groups=*/3 * c);
    p.out = make_conv(ctx, prefix + ".out", c, c, 1, 1, true, /*out_projection=*/true);
    if (kind == AttnKind::SelfDense) p.sprime = make_conv(ctx, prefix + ".sprime", c, c, 3);
    p.temperature = ctx.reg.add(prefix + ".temp", TensorT<T>::ones({cfg.heads}));
    return p;
}

namespace detail {

/// Transposed (channel-token) attention core. Tokens are per-head channel
/// descriptors of length H*W; Q and K are L2-normalized along the spatial
/// axis and scaled by the learnable temperature. k_th <= 0 disables masking.
template <class T>
TensorT<T> channel_token_attention(const TensorT<T>& q, const TensorT<T>& k,
                                   const TensorT<T>& v, const TensorT<T>& temperature,
                                   int64_t heads, int64_t k_th) {
    const int64_t n = q.dim(0), c = q.dim(1), h = q.dim(2), w = q.dim(3);
    const int64_t tokens = c / heads, hw = h * w;
    auto tokenize = [&](const TensorT<T>& t) {
        return reshape(t, {n, heads, tokens, hw});
    };
    TensorT<T> qn = l2_normalize_rows(tokenize(q));
    TensorT<T> kn = l2_normalize_rows(tokenize(k));
    TensorT<T> logits = mul_headwise(matmul(qn, transpose_last2(kn)), temperature);
    if (k_th > 0) logits = topk_mask(logits, k_th);
    TensorT<T> attn = softmax_rows(logits);
    TensorT<T> out = matmul(attn, tokenize(v));
    return reshape(out, {n, c, h, w});
}

template <class T>
void split_qkv(const AttentionParams<T>& p, const TensorT<T>& x, TensorT<T>& q,
               TensorT<T>& k, TensorT<T>& v) {
    const int64_t c = x.dim(1);
    TensorT<T> qkv = p.qkv_dw(p.qkv_pw(x));
    q = slice_channels(qkv, 0, c);
    k = slice_channels(qkv, c, 2 * c);
    v = slice_channels(qkv, 2 * c, 3 * c);
}

}  // namespace detail

/// Segmentation-guided sparse attention: K and V are modulated element-wise
/// by the guidance feature s before top-k masked channel-token attention.
template <class T>
TensorT<T> sgsa(const TensorT<T>& x, const TensorT<T>& s, const AttentionParams<T>& p) {
    detail::check_same_shape(x, s, "sgsa");
    TensorT<T> q, k, v;
    detail::split_qkv(p, x, q, k, v);
    const int64_t tokens = x.dim(1) / p.cfg.heads;
    TensorT<T> out = detail::channel_token_attention(
        q, mul(k, s), mul(v, s), p.temperature, p.cfg.heads,
        topk_count(p.cfg.sparsity_ratio, tokens));
    return p.out(out);
}

/// Lightweight SGSA: identical to sgsa except the Key matrix is left
/// unmodulated; guidance only adjusts the Value matrix.
template <class T>
TensorT<T> l_sgsa(const TensorT<T>& x, const TensorT<T>& s, const AttentionParams<T>& p) {
    detail::check_same_shape(x, s, "l_sgsa");
    TensorT<T> q, k, v;
    detail::split_qkv(p, x, q, k, v);
    const int64_t tokens = x.dim(1) / p.cfg.heads;
    TensorT<T> out = detail::channel_token_attention(
        q, k, mul(v, s), p.temperature, p.cfg.heads,
        topk_count(p.cfg.sparsity_ratio, tokens));
    return p.out(out);
}

/// Dense attention with the self-derived modulation feature
/// S' = ELU(conv3x3(x)) applied to V; logits stay unmasked.
template <class T>
TensorT<T> dense_attn(const TensorT<T>& x, const AttentionParams<T>& p) {
    SGSF_CHECK(p.kind == AttnKind::SelfDense, "dense_attn needs SelfDense params");
    TensorT<T> q, k, v;
    detail::split_qkv(p, x, q, k, v);
    TensorT<T> sp = elu(p.sprime(x));
    TensorT<T> out = detail::channel_token_attention(q, k, mul(v, sp), p.temperature,
                                                     p.cfg.heads, /*k_th=*/0);
    return p.out(out);
}

/// Unmasked, unmodulated channel-token attention (latent stage).
template <class T>
TensorT<T> plain_attn(const TensorT<T>& x, const AttentionParams<T>& p) {
    TensorT<T> q, k, v;
    detail::split_qkv(p, x, q, k, v);
    TensorT<T> out = detail::channel_token_attention(q, k, v, p.temperature,
                                                     p.cfg.heads, /*k_th=*/0);
    return p.out(out);
}

}  // namespace sgsf
