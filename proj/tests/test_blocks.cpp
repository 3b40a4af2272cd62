#include <gtest/gtest.h>

#include "sgsf/blocks.hpp"

using namespace sgsf;

namespace {

struct Built {
    ParamRegistry reg;
    std::vector<std::string> out_projs;
};

void zero_named(ParamRegistry& reg, const std::vector<std::string>& names) {
    for (const auto& n : names) {
        Tensor t = reg.get(n);
        std::fill(t.data().begin(), t.data().end(), 0.f);
    }
}

void zero_all_biases(ParamRegistry& reg) {
    for (const auto& p : reg.all())
        if (p.name.size() > 2 && p.name.substr(p.name.size() - 2) == ".b") {
            Tensor t = p.tensor;
            std::fill(t.data().begin(), t.data().end(), 0.f);
        }
}

}  // namespace

// --- MGFN ---

TEST(Mgfn, ZeroFinalProjectionIsIdentity) {
    Built b;
    Rng rng(1);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_mgfn(ctx, "mgfn", 4, 2);
    zero_named(b.reg, b.out_projs);
    Rng rng2(2);
    Tensor x = Tensor::randn({1, 4, 3, 3}, rng2);
    EXPECT_EQ(mgfn(x, p).data(), x.data());
}

TEST(Mgfn, ZeroInputZeroBiasesGivesZero) {
    Built b;
    Rng rng(3);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_mgfn(ctx, "mgfn", 4, 2);
    zero_all_biases(b.reg);
    Tensor x = Tensor::zeros({1, 4, 2, 2});
    Tensor y = mgfn(x, p);
    for (float v : y.data()) EXPECT_EQ(v, 0.f);
}

TEST(Mgfn, ScalarChainHandEvaluation) {
    // 1 channel, 1 pixel, e=1, all conv weights 1, biases 0. With zero
    // padding only center taps land, so every depth-wise conv is a scalar
    // pass-through and the chain reduces to v + gelu(v) * 4 relu(v).
    Built b;
    Rng rng(4);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_mgfn(ctx, "mgfn", 1, 1);
    for (const auto& prm : b.reg.all()) {
        Tensor t = prm.tensor;
        const bool is_bias = prm.name.substr(prm.name.size() - 2) == ".b";
        std::fill(t.data().begin(), t.data().end(), is_bias ? 0.f : 1.f);
    }
    const float v = 0.5f;
    Tensor x = Tensor::from_data({1, 1, 1, 1}, {v});
    Tensor y = mgfn(x, p);
    const double g = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));  // gelu
    const double expect = v + g * 4.0 * v;                            // relu(v) = v
    EXPECT_NEAR(y.ptr()[0], expect, 1e-6);
}

// --- CAAB ---

TEST(Caab, ZeroConvIsIdentity) {
    Built b;
    Rng rng(5);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_caab(ctx, "caab", 8);
    zero_named(b.reg, b.out_projs);  // caab.conv.{w,b}
    Rng rng2(6);
    Tensor x = Tensor::randn({2, 8, 4, 4}, rng2);
    EXPECT_EQ(caab(x, p).data(), x.data());
}

TEST(Caab, OpenGateApproximatesResidualPlusConv) {
    Built b;
    Rng rng(7);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_caab(ctx, "caab", 8);
    Tensor bias = b.reg.get("caab.se_fc2.b");
    std::fill(bias.data().begin(), bias.data().end(), 30.f);  // sigmoid -> ~1
    Rng rng2(8);
    Tensor x = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor y = caab(x, p);
    Tensor expect = add(x, p.conv(x));
    for (int64_t i = 0; i < y.numel(); ++i)
        EXPECT_NEAR(y.ptr()[i], expect.ptr()[i], 1e-5);
}

TEST(Caab, ConstantInputScalarArithmetic) {
    // C=4, r=4 -> one squeeze unit. All weights 1, biases 0, input constant
    // c0 at a single pixel: pooled = c0, a = relu(4 c0), gate = sigmoid(a),
    // conv3x3 center taps -> 4 c0 per channel, out = c0 + gate * 4 c0.
    Built b;
    Rng rng(9);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_caab(ctx, "caab", 4);
    for (const auto& prm : b.reg.all()) {
        Tensor t = prm.tensor;
        const bool is_bias = prm.name.substr(prm.name.size() - 2) == ".b";
        std::fill(t.data().begin(), t.data().end(), is_bias ? 0.f : 1.f);
    }
    const float c0 = 0.3f;
    Tensor x = Tensor::filled({1, 4, 1, 1}, c0);
    Tensor y = caab(x, p);
    const double gate = 1.0 / (1.0 + std::exp(-4.0 * c0));
    const double expect = c0 + gate * 4.0 * c0;
    for (float v : y.data()) EXPECT_NEAR(v, expect, 1e-6);
}

TEST(Caab, ChannelsBelowReductionThrow) {
    Built b;
    Rng rng(10);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    EXPECT_THROW(make_caab(ctx, "caab", 2, 4), std::runtime_error);
}

// --- encoder / decoder / latent identity under zero-init projections ---

TEST(EncoderBlock, ZeroInitProjectionsIsIdentity) {
    Built b;
    Rng rng(11);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_encoder_block(ctx, "enc", 8, 2, 1, AttnConfig{2, 0.67}, 2);
    zero_named(b.reg, b.out_projs);
    Rng rng2(12);
    Tensor x = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor s = Tensor::randn({1, 8, 4, 4}, rng2);
    EXPECT_EQ(encoder_block(x, s, p).data(), x.data());
}

TEST(DecoderBlock, ZeroInitProjectionsIsIdentity) {
    Built b;
    Rng rng(13);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_decoder_block(ctx, "dec", 8, 2, AttnConfig{2, 0.67}, 2);
    zero_named(b.reg, b.out_projs);
    Rng rng2(14);
    Tensor x = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor s = Tensor::randn({1, 8, 4, 4}, rng2);
    EXPECT_EQ(decoder_block(x, s, p).data(), x.data());
}

TEST(LatentBlock, ZeroInitProjectionsIsIdentity) {
    Built b;
    Rng rng(15);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_latent_block(ctx, "latent", 8, 2, 2, 2);
    zero_named(b.reg, b.out_projs);
    Rng rng2(16);
    Tensor x = Tensor::randn({1, 8, 4, 4}, rng2);
    EXPECT_EQ(latent_block(x, p).data(), x.data());
}

TEST(Blocks, ShapePreservation) {
    Built b;
    Rng rng(17);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto enc = make_encoder_block(ctx, "enc", 8, 1, 1, AttnConfig{2, 0.67}, 2);
    auto dec = make_decoder_block(ctx, "dec", 8, 1, AttnConfig{2, 0.67}, 2);
    auto lat = make_latent_block(ctx, "lat", 8, 1, 2, 2);
    Rng rng2(18);
    Tensor x = Tensor::randn({2, 8, 6, 4}, rng2);
    Tensor s = Tensor::randn({2, 8, 6, 4}, rng2);
    EXPECT_EQ(encoder_block(x, s, enc).shape(), x.shape());
    EXPECT_EQ(decoder_block(x, s, dec).shape(), x.shape());
    EXPECT_EQ(latent_block(x, lat).shape(), x.shape());
}

TEST(Blocks, GradientReachesEveryParameter) {
    // Non-degenerate random init: after one backward pass no parameter's
    // gradient may be identically zero.
    Built b;
    Rng rng(19);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto dec = make_decoder_block(ctx, "dec", 8, 1, AttnConfig{2, 0.67}, 2);
    Rng rng2(20);
    Tensor x = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor s = Tensor::rand_uniform({1, 8, 4, 4}, rng2, 0.2f, 1.f);
    Tensor y = decoder_block(x, s, dec);
    Tensor loss = mean_all(mul(y, y));
    b.reg.zero_grad();
    backward(loss);
    for (const auto& prm : b.reg.all()) {
        const auto& g = prm.tensor.grad();
        ASSERT_FALSE(g.empty()) << prm.name << " never received gradient";
        bool any = false;
        for (float v : g)
            if (v != 0.f) any = true;
        EXPECT_TRUE(any) << prm.name << " gradient is identically zero";
    }
}

TEST(Blocks, BatchDuplicationDuplicatesOutput) {
    Built b;
    Rng rng(21);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto enc = make_encoder_block(ctx, "enc", 8, 1, 1, AttnConfig{2, 0.67}, 2);
    Rng rng2(22);
    Tensor x1 = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor s1 = Tensor::randn({1, 8, 4, 4}, rng2);
    Tensor x2 = Tensor::zeros({2, 8, 4, 4});
    Tensor s2 = Tensor::zeros({2, 8, 4, 4});
    for (int rep = 0; rep < 2; ++rep) {
        std::copy(x1.ptr(), x1.ptr() + x1.numel(), x2.ptr() + rep * x1.numel());
        std::copy(s1.ptr(), s1.ptr() + s1.numel(), s2.ptr() + rep * s1.numel());
    }
    Tensor y1 = encoder_block(x1, s1, enc);
    Tensor y2 = encoder_block(x2, s2, enc);
    for (int64_t i = 0; i < y1.numel(); ++i) {
        EXPECT_EQ(y2.ptr()[i], y1.ptr()[i]);
        EXPECT_EQ(y2.ptr()[y1.numel() + i], y1.ptr()[i]);
    }
}

// --- refine ---

TEST(Refine, MapsFourScalesToRgbFullResolution) {
    Built b;
    Rng rng(23);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_refine(ctx, "refine", 8);
    Rng rng2(24);
    std::vector<Tensor> decs;
    for (int i = 0; i < 4; ++i)
        decs.push_back(Tensor::randn({2, 8 << i, 16 >> i, 16 >> i}, rng2));
    Tensor y = refine(decs, p);
    EXPECT_EQ(y.shape(), (Shape{2, 3, 16, 16}));
}

TEST(Refine, ZeroFinalConvGivesZeroResidual) {
    Built b;
    Rng rng(25);
    BuildCtx<float> ctx{b.reg, rng, &b.out_projs};
    auto p = make_refine(ctx, "refine", 8);
    zero_named(b.reg, {"refine.conv2.w", "refine.conv2.b"});
    Rng rng2(26);
    std::vector<Tensor> decs;
    for (int i = 0; i < 4; ++i)
        decs.push_back(Tensor::randn({1, 8 << i, 16 >> i, 16 >> i}, rng2));
    Tensor y = refine(decs, p);
    for (float v : y.data()) EXPECT_EQ(v, 0.f);
}
