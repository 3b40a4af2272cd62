#pragma once

#include <functional>

#include "sgsf/blocks.hpp"
#include "sgsf/grad_check.hpp"
#include "sgsf/guidance.hpp"
#include "sgsf/loss.hpp"

namespace sgsf {

/// Finite-difference verification of every differentiable op and composite
/// block at tiny shapes, in 64-bit. Each item is re-checked across `seeds`
/// fixed seeds; the reported error is the worst over all seeds.
namespace grad_suite {

using Item = std::pair<std::string, std::function<GradCheckResult(uint64_t)>>;

namespace detail {

/// Uniform magnitudes in [0.1, 1.0] with random sign: keeps relu/abs/top-k
/// style kinks farther than the FD step from every sample point.
inline DTensor away_from_kinks(Shape shape, Rng& rng) {
    DTensor t = DTensor::zeros(std::move(shape));
    for (auto& v : t.data()) {
        const double mag = rng.uniform(0.1, 1.0);
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

inline DTensor positive(Shape shape, Rng& rng, double lo = 0.5, double hi = 1.5) {
    DTensor t = DTensor::zeros(std::move(shape));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

/// Scalar loss: fixed random projection of the op output.
inline DTensor project(const DTensor& y, uint64_t salt) {
    Rng rng(Rng::mix(salt, 0x70726f6aull));
    DTensor r = DTensor::zeros(y.shape());
    for (auto& v : r.data()) v = rng.uniform(-1.0, 1.0);
    return sum_all(mul(y, r));
}

/// All parameters of a registry as grad-check leaves.
inline std::vector<DTensor> registry_leaves(const ParamRegistryT<double>& reg) {
    std::vector<DTensor> leaves;
    for (const auto& p : reg.all()) leaves.push_back(p.tensor);
    return leaves;
}

}  // namespace detail

inline std::vector<Item> items() {
    using detail::away_from_kinks;
    using detail::positive;
    using detail::project;
    std::vector<Item> out;

    auto add_item = [&out](const std::string& name,
                           std::function<GradCheckResult(uint64_t)> fn) {
        out.emplace_back(name, std::move(fn));
    };

    // --- pointwise ---
    add_item("add", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3}, rng), b = away_from_kinks({2, 3}, rng);
        return grad_check("add", [&] { return project(add(a, b), seed); }, {a, b});
    });
    add_item("sub", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3}, rng), b = away_from_kinks({2, 3}, rng);
        return grad_check("sub", [&] { return project(sub(a, b), seed); }, {a, b});
    });
    add_item("mul", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3}, rng), b = away_from_kinks({2, 3}, rng);
        return grad_check("mul", [&] { return project(mul(a, b), seed); }, {a, b});
    });
    add_item("div", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3}, rng), b = positive({2, 3}, rng);
        return grad_check("div", [&] { return project(div(a, b), seed); }, {a, b});
    });
    add_item("scalar_ops", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3}, rng);
        return grad_check(
            "scalar_ops",
            [&] { return project(add_scalar(mul_scalar(a, 1.7), -0.3), seed); }, {a});
    });
    add_item("sigmoid", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("sigmoid", [&] { return project(sigmoid(a), seed); }, {a});
    });
    add_item("relu", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("relu", [&] { return project(relu(a), seed); }, {a});
    });
    add_item("gelu", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("gelu", [&] { return project(gelu(a), seed); }, {a});
    });
    add_item("elu", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("elu", [&] { return project(elu(a), seed); }, {a});
    });
    add_item("abs", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("abs", [&] { return project(abs_val(a), seed); }, {a});
    });
    add_item("log", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = positive({2, 4}, rng);
        return grad_check("log", [&] { return project(log_nat(a), seed); }, {a});
    });
    add_item("clamp_min", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 4}, rng);
        return grad_check("clamp_min",
                          [&] { return project(clamp_min(a, 0.05), seed); }, {a});
    });

    // --- structure ---
    add_item("reshape_transpose", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3, 4}, rng);
        return grad_check(
            "reshape_transpose",
            [&] { return project(transpose_last2(reshape(a, {2, 4, 3})), seed); }, {a});
    });
    add_item("concat_slice", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({1, 2, 2, 2}, rng);
        DTensor b = away_from_kinks({1, 3, 2, 2}, rng);
        return grad_check(
            "concat_slice",
            [&] {
                return project(slice_channels(concat_channels<double>({a, b}), 1, 4), seed);
            },
            {a, b});
    });
    add_item("pixel_shuffle_roundtrip", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({1, 4, 4, 4}, rng);
        return grad_check(
            "pixel_shuffle_roundtrip",
            [&] { return project(pixel_unshuffle(pixel_shuffle(a)), seed); }, {a});
    });
    add_item("avgpool2x2", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({1, 2, 4, 4}, rng);
        return grad_check("avgpool2x2", [&] { return project(avgpool2x2(a), seed); }, {a});
    });
    add_item("reductions", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({1, 3, 2, 2}, rng);
        return grad_check(
            "reductions",
            [&] { return add(mean_all(a), sum_all(mean_spatial(a))); }, {a});
    });
    add_item("mul_channelwise", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3, 2, 2}, rng);
        DTensor s = away_from_kinks({2, 3, 1, 1}, rng);
        return grad_check("mul_channelwise",
                          [&] { return project(mul_channelwise(a, s), seed); }, {a, s});
    });
    add_item("mul_headwise", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 2, 3, 3}, rng);
        DTensor t = positive({2}, rng);
        return grad_check("mul_headwise",
                          [&] { return project(mul_headwise(a, t), seed); }, {a, t});
    });

    // --- linear algebra ---
    add_item("matmul", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 3, 4}, rng), b = away_from_kinks({2, 4, 2}, rng);
        return grad_check("matmul", [&] { return project(matmul(a, b), seed); }, {a, b});
    });
    add_item("matmul_broadcast", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({3, 4}, rng), b = away_from_kinks({2, 4, 2}, rng);
        return grad_check("matmul_broadcast",
                          [&] { return project(matmul(a, b), seed); }, {a, b});
    });

    // --- conv2d over padding modes and grouping ---
    auto conv_item = [add_item](const std::string& name, Pad pad, bool depthwise) {
        add_item(name, [pad, depthwise, name](uint64_t seed) {
            Rng rng(seed);
            if (depthwise) {
                DTensor x = away_from_kinks({1, 4, 5, 5}, rng);
                DTensor w = away_from_kinks({4, 1, 3, 3}, rng);
                DTensor b = away_from_kinks({4}, rng);
                return grad_check(
                    name, [&, pad] { return project(conv2d(x, w, b, pad, 4), seed); },
                    {x, w, b});
            }
            DTensor x = away_from_kinks({2, 2, 4, 4}, rng);
            DTensor w = away_from_kinks({3, 2, 3, 3}, rng);
            DTensor b = away_from_kinks({3}, rng);
            return grad_check(
                name, [&, pad] { return project(conv2d(x, w, b, pad, 1), seed); },
                {x, w, b});
        });
    };
    conv_item("conv2d_zeros", Pad::Zeros, false);
    conv_item("conv2d_reflect", Pad::Reflect, false);
    conv_item("conv2d_circular", Pad::Circular, false);
    conv_item("conv2d_depthwise", Pad::Zeros, true);

    // --- normalizations, softmax, top-k ---
    add_item("softmax_rows", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({3, 4}, rng);
        return grad_check("softmax_rows",
                          [&] { return project(softmax_rows(a), seed); }, {a});
    });
    add_item("layernorm", [](uint64_t seed) {
        Rng rng(seed);
        DTensor x = away_from_kinks({1, 3, 2, 2}, rng);
        DTensor g = positive({3}, rng), b = away_from_kinks({3}, rng);
        return grad_check("layernorm",
                          [&] { return project(layernorm(x, g, b), seed); }, {x, g, b});
    });
    add_item("l2_normalize_rows", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({3, 5}, rng);
        return grad_check("l2_normalize_rows",
                          [&] { return project(l2_normalize_rows(a), seed); }, {a});
    });
    add_item("topk_softmax", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = away_from_kinks({2, 6}, rng);
        return grad_check(
            "topk_softmax",
            [&] { return project(softmax_rows(topk_mask(a, 3)), seed); }, {a});
    });

    // --- composite blocks (parameters included as leaves) ---
    add_item("sgft", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 1));
        BuildCtx<double> ctx{reg, init};
        auto p = make_sgft(ctx, "sgft", 3);
        DTensor t = away_from_kinks({1, 3, 2, 2}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(t);
        return grad_check("sgft", [&] { return project(sgft(t, p), seed); }, leaves);
    });
    auto attn_item = [add_item](const std::string& name, AttnKind kind) {
        add_item(name, [name, kind](uint64_t seed) {
            Rng rng(seed);
            ParamRegistryT<double> reg;
            Rng init(Rng::mix(seed, 2));
            BuildCtx<double> ctx{reg, init};
            AttnConfig cfg{2, 0.67};
            auto p = make_attention(ctx, "attn", 8, cfg, kind);
            DTensor x = away_from_kinks({1, 8, 4, 4}, rng);
            DTensor s = away_from_kinks({1, 8, 4, 4}, rng);
            auto leaves = detail::registry_leaves(reg);
            leaves.push_back(x);
            leaves.push_back(s);
            return grad_check(
                name,
                [&, kind] {
                    switch (kind) {
                        case AttnKind::Sparse: return project(sgsa(x, s, p), seed);
                        case AttnKind::SelfDense: return project(dense_attn(x, p), seed);
                        case AttnKind::Plain: return project(plain_attn(x, p), seed);
                    }
                    return project(sgsa(x, s, p), seed);
                },
                leaves);
        });
    };
    attn_item("sgsa", AttnKind::Sparse);
    attn_item("dense_attn", AttnKind::SelfDense);
    attn_item("plain_attn", AttnKind::Plain);
    add_item("l_sgsa", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 3));
        BuildCtx<double> ctx{reg, init};
        auto p = make_attention(ctx, "attn", 8, AttnConfig{2, 0.5}, AttnKind::Sparse);
        DTensor x = away_from_kinks({1, 8, 2, 2}, rng);
        DTensor s = away_from_kinks({1, 8, 2, 2}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        leaves.push_back(s);
        return grad_check("l_sgsa", [&] { return project(l_sgsa(x, s, p), seed); }, leaves);
    });
    add_item("mgfn", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 4));
        BuildCtx<double> ctx{reg, init};
        auto p = make_mgfn(ctx, "mgfn", 4, 1);
        DTensor x = away_from_kinks({1, 4, 3, 3}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        return grad_check("mgfn", [&] { return project(mgfn(x, p), seed); }, leaves);
    });
    add_item("caab", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 5));
        BuildCtx<double> ctx{reg, init};
        auto p = make_caab(ctx, "caab", 4);
        DTensor x = away_from_kinks({1, 4, 3, 3}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        return grad_check("caab", [&] { return project(caab(x, p), seed); }, leaves);
    });
    add_item("resample_down_up", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 6));
        BuildCtx<double> ctx{reg, init};
        auto down = make_down(ctx, "down", 2);
        auto up = make_up(ctx, "up", 4);
        DTensor x = away_from_kinks({1, 2, 4, 4}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        return grad_check("resample_down_up",
                          [&] { return project(up(down(x)), seed); }, leaves);
    });
    add_item("encoder_block", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 7));
        BuildCtx<double> ctx{reg, init};
        auto p = make_encoder_block(ctx, "enc", 4, 1, 1, AttnConfig{2, 0.67}, 1);
        DTensor x = away_from_kinks({1, 4, 3, 3}, rng);
        DTensor s = away_from_kinks({1, 4, 3, 3}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        leaves.push_back(s);
        return grad_check("encoder_block",
                          [&] { return project(encoder_block(x, s, p), seed); }, leaves);
    });
    add_item("decoder_block", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 8));
        BuildCtx<double> ctx{reg, init};
        auto p = make_decoder_block(ctx, "dec", 4, 1, AttnConfig{2, 0.67}, 1);
        DTensor x = away_from_kinks({1, 4, 3, 3}, rng);
        DTensor s = away_from_kinks({1, 4, 3, 3}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        leaves.push_back(s);
        return grad_check("decoder_block",
                          [&] { return project(decoder_block(x, s, p), seed); }, leaves);
    });
    add_item("latent_block", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 9));
        BuildCtx<double> ctx{reg, init};
        auto p = make_latent_block(ctx, "latent", 4, 1, 2, 1);
        DTensor x = away_from_kinks({1, 4, 3, 3}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(x);
        return grad_check("latent_block",
                          [&] { return project(latent_block(x, p), seed); }, leaves);
    });
    add_item("refine", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 10));
        BuildCtx<double> ctx{reg, init};
        auto p = make_refine(ctx, "refine", 4);
        std::vector<DTensor> decs;
        for (int i = 0; i < 4; ++i)
            decs.push_back(away_from_kinks({1, 4 << i, 8 >> i, 8 >> i}, rng));
        auto leaves = detail::registry_leaves(reg);
        for (const auto& d : decs) leaves.push_back(d);
        return grad_check("refine", [&] { return project(refine(decs, p), seed); }, leaves);
    });
    add_item("guidance_pyramid", [](uint64_t seed) {
        Rng rng(seed);
        ParamRegistryT<double> reg;
        Rng init(Rng::mix(seed, 11));
        BuildCtx<double> ctx{reg, init};
        auto p = make_guidance(ctx, "guid", 4);
        DTensor seg = away_from_kinks({1, 3, 16, 16}, rng);
        auto leaves = detail::registry_leaves(reg);
        leaves.push_back(seg);
        return grad_check(
            "guidance_pyramid",
            [&] {
                auto g = build_pyramid(seg, p);
                DTensor acc = mean_all(g.s[0]);
                for (int i = 1; i < 4; ++i) acc = add(acc, mean_all(g.s[i]));
                return acc;
            },
            leaves);
    });

    // --- loss terms, each independently w.r.t. the restored image ---
    add_item("loss_l1", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = positive({3, 8, 8}, rng, 0.1, 0.9), b = positive({3, 8, 8}, rng, 0.1, 0.9);
        return grad_check("loss_l1", [&] { return mean_all(abs_val(sub(a, b))); }, {a});
    });
    add_item("loss_psnr", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = positive({3, 8, 8}, rng, 0.1, 0.9), b = positive({3, 8, 8}, rng, 0.1, 0.9);
        return grad_check(
            "loss_psnr",
            [&] {
                DTensor d = sub(a, b);
                return mul_scalar(log_nat(clamp_min(mean_all(mul(d, d)), 1e-10)),
                                  0.25 / std::log(10.0));
            },
            {a});
    });
    add_item("loss_ssim", [](uint64_t seed) {
        Rng rng(seed);
        DTensor a = positive({3, 8, 8}, rng, 0.1, 0.9), b = positive({3, 8, 8}, rng, 0.1, 0.9);
        return grad_check("loss_ssim", [&] { return ssim_tensor(a, b); }, {a});
    });
    add_item("loss_perceptual", [](uint64_t seed) {
        Rng rng(seed);
        PerceptualPyramidT<double> pyramid;
        DTensor a = positive({1, 3, 8, 8}, rng, 0.1, 0.9);
        DTensor b = positive({1, 3, 8, 8}, rng, 0.1, 0.9);
        return grad_check("loss_perceptual",
                          [&] { return pyramid.distance(a, b); }, {a});
    });

    return out;
}

/// Runs every item over `seeds` fixed seeds, reporting the worst error per
/// item.
inline std::vector<GradCheckResult> run(int seeds = 20) {
    std::vector<GradCheckResult> results;
    for (const auto& [name, fn] : items()) {
        GradCheckResult worst{name, 0.0, 1e-3, true};
        for (int s = 0; s < seeds; ++s) {
            GradCheckResult r = fn(Rng::mix(0x5eed, static_cast<uint64_t>(s)));
            if (r.max_rel_err > worst.max_rel_err) worst.max_rel_err = r.max_rel_err;
            worst.pass = worst.pass && r.pass;
        }
        results.push_back(worst);
    }
    return results;
}

}  // namespace grad_suite
}  // namespace sgsf
