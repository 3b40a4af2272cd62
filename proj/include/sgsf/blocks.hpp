#pragma once

#include "sgsf/attention.hpp"

namespace sgsf {

// ---------------------------------------------------------------------------
// MGFN — gated feed-forward with mixed 3x3/5x5 depth-wise gating
// ---------------------------------------------------------------------------

template <class T>
struct MgfnParams {
    Conv2dLayer<T> ma_pw, ma_dw;  // main branch: 1x1 C->eC, dw 3x3
    Conv2dLayer<T> x1_pw, x1_dw;  // gating branch 1
    Conv2dLayer<T> x2_pw, x2_dw;  // gating branch 2
    Conv2dLayer<T> mix3, mix5;    // depth-wise 3x3 / 5x5 on the 2eC concat
    Conv2dLayer<T> ga_pw;         // 1x1, 4eC -> eC
    Conv2dLayer<T> proj;          // 1x1, eC -> C
};

template <class T>
MgfnParams<T> make_mgfn(BuildCtx<T>& ctx, const std::string& prefix, int64_t c,
                        int64_t expansion) {
    const int64_t e = c * expansion;
    MgfnParams<T> p;
    p.ma_pw = make_conv(ctx, prefix + ".ma_pw", e, c, 1);
    p.ma_dw = make_conv(ctx, prefix + ".ma_dw", e, e, 3, e);
    p.x1_pw = make_conv(ctx, prefix + ".x1_pw", e, c, 1);
    p.x1_dw = make_conv(ctx, prefix + ".x1_dw", e, e, 3, e);
    p.x2_pw = make_conv(ctx, prefix + ".x2_pw", e, c, 1);
    p.x2_dw = make_conv(ctx, prefix + ".x2_dw", e, e, 3, e);
    p.mix3 = make_conv(ctx, prefix + ".mix3", 2 * e, 2 * e, 3, 2 * e);
    p.mix5 = make_conv(ctx, prefix + ".mix5", 2 * e, 2 * e, 5, 2 * e);
    p.ga_pw = make_conv(ctx, prefix + ".ga_pw", e, 4 * e, 1);
    p.proj = make_conv(ctx, prefix + ".proj", c, e, 1, 1, true, /*out_projection=*/true);
    return p;
}

/// Gated transform without the residual; transformer blocks add their own
/// skip around this.
template <class T>
TensorT<T> mgfn_core(const TensorT<T>& x, const MgfnParams<T>& p) {
    TensorT<T> ma = gelu(p.ma_dw(p.ma_pw(x)));
    TensorT<T> x1 = relu(p.x1_dw(p.x1_pw(x)));
    TensorT<T> x2 = relu(p.x2_dw(p.x2_pw(x)));
    TensorT<T> m3 = relu(p.mix3(concat_channels<T>({x1, x2})));
    TensorT<T> m5 = relu(p.mix5(concat_channels<T>({x2, x1})));
    TensorT<T> ga = p.ga_pw(concat_channels<T>({m3, m5}));
    return p.proj(mul(ma, ga));
}

template <class T>
TensorT<T> mgfn(const TensorT<T>& x, const MgfnParams<T>& p) {
    return add(x, mgfn_core(x, p));
}

// ---------------------------------------------------------------------------
// CAAB — squeeze-excite channel recalibration of a 3x3-conv feature
// ---------------------------------------------------------------------------

template <class T>
struct CaabParams {
    Conv2dLayer<T> conv;      // 3x3, C -> C
    Conv2dLayer<T> se_fc1;    // 1x1, C -> C/r
    Conv2dLayer<T> se_fc2;    // 1x1, C/r -> C
};

template <class T>
CaabParams<T> make_caab(BuildCtx<T>& ctx, const std::string& prefix, int64_t c,
                        int64_t reduction = 4) {
    SGSF_CHECK(c >= reduction, prefix << ": channel count " << c
                                      << " below reduction ratio " << reduction);
    CaabParams<T> p;
    p.conv = make_conv(ctx, prefix + ".conv", c, c, 3, 1, true, /*out_projection=*/true);
    p.se_fc1 = make_conv(ctx, prefix + ".se_fc1", c / reduction, c, 1);
    p.se_fc2 = make_conv(ctx, prefix + ".se_fc2", c, c / reduction, 1);
    return p;
}

template <class T>
TensorT<T> caab(const TensorT<T>& x, const CaabParams<T>& p) {
    TensorT<T> gate = sigmoid(p.se_fc2(relu(p.se_fc1(mean_spatial(x)))));
    return add(x, mul_channelwise(p.conv(x), gate));
}

// ---------------------------------------------------------------------------
// Transformer units
// ---------------------------------------------------------------------------

/// One pre-norm transformer unit: x + attn(LN(x)[, s]) then x + ffn(LN(x)).
template <class T>
struct TransformerUnit {
    LayerNormLayer<T> norm1, norm2;
    AttentionParams<T> attn;
    MgfnParams<T> ffn;
};

template <class T>
TransformerUnit<T> make_transformer_unit(BuildCtx<T>& ctx, const std::string& prefix,
                                         int64_t c, const AttnConfig& cfg,
                                         AttnKind kind, int64_t expansion) {
    TransformerUnit<T> u;
    u.norm1 = make_layernorm(ctx, prefix + ".norm1", c);
    u.attn = make_attention(ctx, prefix + ".attn", c, cfg, kind);
    u.norm2 = make_layernorm(ctx, prefix + ".norm2", c);
    u.ffn = make_mgfn(ctx, prefix + ".ffn", c, expansion);
    return u;
}

template <class T>
TensorT<T> apply_unit(const TensorT<T>& x, const TensorT<T>& s,
                      const TransformerUnit<T>& u) {
    TensorT<T> h;
    switch (u.attn.kind) {
        case AttnKind::Sparse:
            h = add(x, s.defined() ? sgsa(u.norm1(x), s, u.attn)
                                   : plain_attn(u.norm1(x), u.attn));
            break;
        case AttnKind::SelfDense:
            h = add(x, dense_attn(u.norm1(x), u.attn));
            break;
        case AttnKind::Plain:
            h = add(x, plain_attn(u.norm1(x), u.attn));
            break;
    }
    return add(h, mgfn_core(u.norm2(h), u.ffn));
}

/// Encoder variant of the unit: l-SGSA in place of full SGSA.
template <class T>
TensorT<T> apply_unit_light(const TensorT<T>& x, const TensorT<T>& s,
                            const TransformerUnit<T>& u) {
    TensorT<T> h = add(x, l_sgsa(u.norm1(x), s, u.attn));
    return add(h, mgfn_core(u.norm2(h), u.ffn));
}

// ---------------------------------------------------------------------------
// Encoder / decoder / latent blocks
// ---------------------------------------------------------------------------

template <class T>
struct EncoderBlockParams {
    std::vector<CaabParams<T>> caabs;
    std::vector<TransformerUnit<T>> units;  // light SGS-transformers
};

template <class T>
EncoderBlockParams<T> make_encoder_block(BuildCtx<T>& ctx, const std::string& prefix,
                                         int64_t c, int64_t depth_caab, int64_t depth_t,
                                         const AttnConfig& cfg, int64_t expansion) {
    EncoderBlockParams<T> p;
    for (int64_t i = 0; i < depth_caab; ++i)
        p.caabs.push_back(make_caab(ctx, prefix + ".caab" + std::to_string(i), c));
    for (int64_t i = 0; i < depth_t; ++i)
        p.units.push_back(make_transformer_unit(ctx, prefix + ".t" + std::to_string(i),
                                                c, cfg, AttnKind::Sparse, expansion));
    return p;
}

template <class T>
TensorT<T> encoder_block(const TensorT<T>& e_prev, const TensorT<T>& s,
                         const EncoderBlockParams<T>& p) {
    detail::check_same_shape(e_prev, s, "encoder_block");
    TensorT<T> x = e_prev;
    for (const auto& cb : p.caabs) x = caab(x, cb);
    for (const auto& u : p.units) x = apply_unit_light(x, s, u);
    return x;
}

/// One reconstruction module = SGS-transformer then dense transformer.
template <class T>
struct ReconstructionModule {
    TransformerUnit<T> sparse;  // SGSA
    TransformerUnit<T> dense;   // self-dense attention
};

template <class T>
struct DecoderBlockParams {
    std::vector<ReconstructionModule<T>> modules;
};

template <class T>
DecoderBlockParams<T> make_decoder_block(BuildCtx<T>& ctx, const std::string& prefix,
                                         int64_t c, int64_t n_modules,
                                         const AttnConfig& cfg, int64_t expansion) {
    DecoderBlockParams<T> p;
    for (int64_t i = 0; i < n_modules; ++i) {
        const std::string mp = prefix + ".mod" + std::to_string(i);
        ReconstructionModule<T> m;
        m.sparse = make_transformer_unit(ctx, mp + ".sgs", c, cfg, AttnKind::Sparse,
                                         expansion);
        m.dense = make_transformer_unit(ctx, mp + ".dense", c, cfg, AttnKind::SelfDense,
                                        expansion);
        p.modules.push_back(std::move(m));
    }
    return p;
}

template <class T>
TensorT<T> decoder_block(const TensorT<T>& d_in, const TensorT<T>& s,
                         const DecoderBlockParams<T>& p) {
    detail::check_same_shape(d_in, s, "decoder_block");
    TensorT<T> x = d_in;
    for (const auto& m : p.modules) {
        x = apply_unit(x, s, m.sparse);
        x = apply_unit(x, TensorT<T>{}, m.dense);
    }
    return x;
}

template <class T>
struct LatentBlockParams {
    std::vector<TransformerUnit<T>> units;
};

template <class T>
LatentBlockParams<T> make_latent_block(BuildCtx<T>& ctx, const std::string& prefix,
                                       int64_t c, int64_t depth, int64_t heads,
                                       int64_t expansion) {
    LatentBlockParams<T> p;
    AttnConfig cfg{heads, 1.0};
    for (int64_t i = 0; i < depth; ++i)
        p.units.push_back(make_transformer_unit(ctx, prefix + ".t" + std::to_string(i),
                                                c, cfg, AttnKind::Plain, expansion));
    return p;
}

template <class T>
TensorT<T> latent_block(const TensorT<T>& x_in, const LatentBlockParams<T>& p) {
    TensorT<T> x = x_in;
    for (const auto& u : p.units) x = apply_unit(x, TensorT<T>{}, u);
    return x;
}

// ---------------------------------------------------------------------------
// Refine — multi-scale fusion back to RGB
// ---------------------------------------------------------------------------

template <class T>
struct RefineParams {
    // ups[i] lifts decoder scale i (0 = full resolution) to scale 0; scale i
    // needs i successive upsamples.
    std::vector<std::vector<UpLayer<T>>> ups;
    Conv2dLayer<T> conv1;  // 3x3, 4*C1 -> C1
    Conv2dLayer<T> conv2;  // 3x3, C1 -> 3
};

template <class T>
RefineParams<T> make_refine(BuildCtx<T>& ctx, const std::string& prefix, int64_t c1) {
    RefineParams<T> p;
    p.ups.resize(4);
    for (int64_t scale = 0; scale < 4; ++scale) {
        int64_t c = c1 << scale;
        for (int64_t j = 0; j < scale; ++j) {
            p.ups[scale].push_back(make_up(
                ctx, prefix + ".s" + std::to_string(scale) + ".up" + std::to_string(j), c));
            c /= 2;
        }
    }
    p.conv1 = make_conv(ctx, prefix + ".conv1", c1, 4 * c1, 3);
    p.conv2 = make_conv(ctx, prefix + ".conv2", 3, c1, 3, 1, true, /*out_projection=*/true);
    return p;
}

/// decoder_outputs[i] is the decoder output at scale i (i halvings of the
/// full resolution, width c1 << i). Result is an RGB residual at full size.
template <class T>
TensorT<T> refine(const std::vector<TensorT<T>>& decoder_outputs,
                  const RefineParams<T>& p) {
    SGSF_CHECK(decoder_outputs.size() == 4, "refine expects 4 decoder scales");
    std::vector<TensorT<T>> lifted;
    for (size_t i = 0; i < 4; ++i) {
        TensorT<T> x = decoder_outputs[i];
        for (const auto& up : p.ups[i]) x = up(x);
        lifted.push_back(x);
    }
    return p.conv2(gelu(p.conv1(concat_channels(lifted))));
}

}  // namespace sgsf
