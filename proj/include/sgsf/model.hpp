#pragma once

#include "sgsf/blocks.hpp"
#include "sgsf/guidance.hpp"

namespace sgsf {

/// Architecture hyperparameters. Encoder arrays run shallow -> deep; decoder
/// arrays run deepest -> shallowest, mirroring how the stage lists are
/// usually quoted. Stage widths are base_width << stage.
struct ModelConfig {
    int64_t base_width = 8;  // tiny preset; see paper_preset() for full scale
    std::array<int64_t, 4> enc_caab_depths{4, 6, 7, 8};
    std::array<int64_t, 4> enc_transformer_depths{1, 1, 1, 1};
    std::array<int64_t, 4> enc_heads{1, 2, 4, 8};
    int64_t latent_depth = 8;
    int64_t latent_heads = 16;
    std::array<int64_t, 4> dec_module_counts{4, 3, 3, 2};  // deepest first
    std::array<int64_t, 4> dec_heads{8, 4, 2, 1};          // deepest first
    double sparsity_ratio = 0.67;
    float alpha = 0.5f;  // seg-map blend weight
    int64_t expansion = 2;
    uint64_t init_seed = 0x5657u;

    void validate() const {
        SGSF_CHECK(base_width >= 4 && base_width % 2 == 0,
                   "base_width must be an even integer >= 4");
        for (int i = 0; i < 4; ++i) {
            const int64_t width = base_width << i;
            SGSF_CHECK(width % enc_heads[i] == 0, "encoder stage " << i << " width "
                                                      << width << " not divisible by "
                                                      << enc_heads[i] << " heads");
            SGSF_CHECK(width % dec_heads[3 - i] == 0, "decoder stage " << i << " width "
                                                          << width << " not divisible by "
                                                          << dec_heads[3 - i] << " heads");
        }
        SGSF_CHECK((base_width * 16) % latent_heads == 0,
                   "latent width not divisible by latent_heads");
        SGSF_CHECK(sparsity_ratio > 0.0 && sparsity_ratio <= 1.0,
                   "sparsity_ratio must be in (0,1]");
        SGSF_CHECK(alpha >= 0.f && alpha <= 1.f, "alpha must be in [0,1]");
        SGSF_CHECK(expansion >= 1, "expansion must be >= 1");
    }

    static ModelConfig tiny_preset() { return ModelConfig{}; }

    /// Full-scale preset; base width chosen so the parameter budget lands at
    /// the published model size.
    static ModelConfig paper_preset() {
        ModelConfig cfg;
        cfg.base_width = 10;
        return cfg;
    }
};

/// The asymmetric U-net: four encoder stages of CAAB + light SGS-transformers,
/// a dense-attention latent stage, four decoder stages of alternating
/// SGSA / dense-attention reconstruction modules, and a multi-scale refine
/// head feeding the global residual.
template <class T>
class ModelT {
public:
    explicit ModelT(const ModelConfig& cfg) : cfg_(cfg) {
        cfg.validate();
        Rng rng(cfg.init_seed);
        BuildCtx<T> ctx{reg_, rng, &out_proj_names_};
        const int64_t c1 = cfg.base_width;

        usfe_ = make_conv(ctx, "usfe", c1, 3, 3);
        guidance_ = make_guidance(ctx, "guid", c1);

        for (int i = 0; i < 4; ++i) {
            const int64_t c = c1 << i;
            AttnConfig acfg{cfg.enc_heads[i], cfg.sparsity_ratio};
            enc_.push_back(make_encoder_block(ctx, "enc" + std::to_string(i + 1), c,
                                              cfg.enc_caab_depths[i],
                                              cfg.enc_transformer_depths[i], acfg,
                                              cfg.expansion));
            downs_.push_back(make_down(ctx, "down" + std::to_string(i + 1), c));
        }

        latent_ = make_latent_block(ctx, "latent", c1 * 16, cfg.latent_depth,
                                    cfg.latent_heads, cfg.expansion);

        // Decoder path from the deepest scale (3) back to full resolution (0).
        for (int scale = 3; scale >= 0; --scale) {
            const int64_t c = c1 << scale;
            const std::string id = std::to_string(scale + 1);
            ups_.push_back(make_up(ctx, "up" + id, 2 * c));     // 2C -> C at 2x
            fuses_.push_back(make_conv(ctx, "fuse" + id, c, 2 * c, 1));
            AttnConfig acfg{cfg.dec_heads[3 - scale], cfg.sparsity_ratio};
            dec_.push_back(make_decoder_block(ctx, "dec" + id, c,
                                              cfg.dec_module_counts[3 - scale], acfg,
                                              cfg.expansion));
        }

        refine_ = make_refine(ctx, "refine", c1);
    }

    const ModelConfig& config() const { return cfg_; }
    ParamRegistryT<T>& registry() { return reg_; }
    const ParamRegistryT<T>& registry() const { return reg_; }

    int64_t param_count() const { return reg_.total_scalars(); }

    /// Zeroes every output-projection parameter, turning the whole model into
    /// the identity map (and each block into an identity around its skip).
    void zero_init_output_projections() {
        for (const auto& name : out_proj_names_) {
            TensorT<T> t = reg_.get(name);
            std::fill(t.data().begin(), t.data().end(), T(0));
        }
    }

    const std::vector<std::string>& output_projection_names() const {
        return out_proj_names_;
    }

    /// Core forward pass; spatial extents must be multiples of 16.
    TensorT<T> forward_seg(const TensorT<T>& i_udc, const TensorT<T>& i_seg,
                           bool train) {
        SGSF_CHECK(i_udc.rank() == 4 && i_udc.dim(1) == 3,
                   "forward expects [N,3,H,W], got " << shape_str(i_udc.shape()));
        detail::check_same_shape(i_udc, i_seg, "forward");
        SGSF_CHECK(i_udc.dim(2) % 16 == 0 && i_udc.dim(3) % 16 == 0,
                   "forward: extents " << i_udc.dim(2) << "x" << i_udc.dim(3)
                                       << " must be multiples of 16");
        (void)train;
        SegGuidanceT<T> guide = build_pyramid(i_seg, guidance_, cfg_.alpha);

        TensorT<T> x = usfe_(i_udc);
        std::vector<TensorT<T>> skips;
        for (int i = 0; i < 4; ++i) {
            TensorT<T> e = encoder_block(x, guide.s[i], enc_[i]);
            skips.push_back(e);
            x = downs_[i](e);
        }

        x = latent_block(x, latent_);

        std::vector<TensorT<T>> dec_out(4);
        for (int j = 0; j < 4; ++j) {  // j=0 is the deepest decoder (scale 3)
            const int scale = 3 - j;
            x = ups_[j](x);
            SGSF_CHECK(skips.size() > static_cast<size_t>(scale) &&
                           skips[scale].defined(),
                       "forward: missing encoder skip for scale " << scale);
            x = fuses_[j](concat_channels<T>({x, skips[scale]}));
            x = decoder_block(x, guide.s[scale], dec_[j]);
            dec_out[scale] = x;
        }

        return add(i_udc, refine(dec_out, refine_));
    }

    /// Full entry point: composes the segmentation map from the masks,
    /// reflect-pads to the next multiple of 16 when needed (eval only), and
    /// clamps to [0,1] in eval mode.
    TensorT<T> forward(const TensorT<T>& i_udc, const std::vector<MaskSet>& masks,
                       bool train) {
        SGSF_CHECK(i_udc.rank() == 4 && i_udc.dim(1) == 3,
                   "forward expects [N,3,H,W], got " << shape_str(i_udc.shape()));
        const int64_t n = i_udc.dim(0), h = i_udc.dim(2), w = i_udc.dim(3);
        SGSF_CHECK(static_cast<int64_t>(masks.size()) == n,
                   "forward: " << masks.size() << " mask sets for batch of " << n);

        TensorT<T> i_seg = TensorT<T>::zeros(i_udc.shape());
        const int64_t plane = 3 * h * w;
        for (int64_t b = 0; b < n; ++b) {
            SGSF_CHECK(masks[b].masks.empty() ||
                           (masks[b].height == h && masks[b].width == w),
                       "forward: mask extent " << masks[b].height << "x"
                                               << masks[b].width << " vs image " << h
                                               << "x" << w);
            Tensor img = Tensor::zeros({3, h, w});
            for (int64_t i = 0; i < plane; ++i)
                img.ptr()[i] = static_cast<float>(i_udc.ptr()[b * plane + i]);
            Tensor seg = compose_seg_map(img, masks[b], cfg_.alpha);
            for (int64_t i = 0; i < plane; ++i)
                i_seg.ptr()[b * plane + i] = static_cast<T>(seg.ptr()[i]);
        }

        if (train) {
            return forward_seg(i_udc, i_seg, true);
        }
        NoGradGuard ng;
        const int64_t ht = (h + 15) / 16 * 16, wt = (w + 15) / 16 * 16;
        TensorT<T> out;
        if (ht == h && wt == w) {
            out = forward_seg(i_udc, i_seg, false);
        } else {
            out = crop_to(forward_seg(pad_reflect_to(i_udc, ht, wt),
                                      pad_reflect_to(i_seg, ht, wt), false),
                          h, w);
        }
        return clamp01_detached(out);
    }

private:
    ModelConfig cfg_;
    ParamRegistryT<T> reg_;
    std::vector<std::string> out_proj_names_;

    Conv2dLayer<T> usfe_;
    GuidanceParams<T> guidance_;
    std::vector<EncoderBlockParams<T>> enc_;
    std::vector<DownLayer<T>> downs_;
    LatentBlockParams<T> latent_;
    std::vector<UpLayer<T>> ups_;      // deepest first
    std::vector<Conv2dLayer<T>> fuses_;  // deepest first
    std::vector<DecoderBlockParams<T>> dec_;  // deepest first
    RefineParams<T> refine_;
};

using Model = ModelT<float>;

}  // namespace sgsf
