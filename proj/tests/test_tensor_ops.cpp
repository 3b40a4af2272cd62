#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sgsf/ops.hpp"

using namespace sgsf;

TEST(Tensor, ShapeDataInvariant) {
    Tensor t = Tensor::zeros({2, 3, 4});
    EXPECT_EQ(t.numel(), 24);
    EXPECT_EQ(shape_numel(t.shape()), 24);
    EXPECT_THROW(Tensor::from_data({2, 3}, {1.f, 2.f}), std::runtime_error);
}

TEST(Tensor, GradBufferMatchesShape) {
    Tensor t = Tensor::ones({3, 2});
    t.set_requires_grad(true);
    EXPECT_TRUE(t.grad().empty());
    t.grad_mut();
    EXPECT_EQ(t.grad().size(), t.data().size());
}

// --- elementwise ---

TEST(Elementwise, SigmoidAtZero) {
    Tensor x = Tensor::zeros({4});
    Tensor y = sigmoid(x);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.5f);
}

TEST(Elementwise, EluClosedForm) {
    // elu(-1) = e^-1 - 1
    Tensor x = Tensor::from_data({3}, {-1.f, 0.f, 2.f});
    Tensor y = elu(x);
    EXPECT_NEAR(y.ptr()[0], std::exp(-1.0) - 1.0, 1e-6);
    EXPECT_FLOAT_EQ(y.ptr()[1], 0.f);
    EXPECT_FLOAT_EQ(y.ptr()[2], 2.f);
}

TEST(Elementwise, ReluNegativeIsZero) {
    Tensor x = Tensor::from_data({2}, {-3.f, 3.f});
    Tensor y = relu(x);
    EXPECT_FLOAT_EQ(y.ptr()[0], 0.f);
    EXPECT_FLOAT_EQ(y.ptr()[1], 3.f);
}

TEST(Elementwise, MulByOnesIsIdentity) {
    Rng rng(3);
    Tensor x = Tensor::rand_uniform({2, 5}, rng);
    Tensor y = mul(x, Tensor::ones({2, 5}));
    EXPECT_EQ(x.data(), y.data());
}

TEST(Elementwise, BroadcastMismatchThrows) {
    EXPECT_THROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), std::runtime_error);
}

// --- softmax ---

TEST(Softmax, UniformRow) {
    Tensor x = Tensor::zeros({1, 4});
    Tensor y = softmax_rows(x);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.25f);
}

TEST(Softmax, MaskedEntryIsExactlyZero) {
    const float ninf = -std::numeric_limits<float>::infinity();
    Tensor x = Tensor::from_data({1, 2}, {3.7f, ninf});
    Tensor y = softmax_rows(x);
    EXPECT_FLOAT_EQ(y.ptr()[0], 1.f);
    EXPECT_EQ(y.ptr()[1], 0.f);
}

TEST(Softmax, ClosedFormTwoEntries) {
    // softmax([1,2]) = [1/(1+e), e/(1+e)]
    Tensor x = Tensor::from_data({1, 2}, {1.f, 2.f});
    Tensor y = softmax_rows(x);
    const double e = std::exp(1.0);
    EXPECT_NEAR(y.ptr()[0], 1.0 / (1.0 + e), 1e-6);
    EXPECT_NEAR(y.ptr()[1], e / (1.0 + e), 1e-6);
}

TEST(Softmax, RowsSumToOne) {
    Rng rng(11);
    Tensor x = Tensor::randn({4, 7}, rng, 3.f);
    Tensor y = softmax_rows(x);
    for (int64_t r = 0; r < 4; ++r) {
        double s = 0;
        for (int64_t j = 0; j < 7; ++j) {
            const float v = y.ptr()[r * 7 + j];
            EXPECT_GE(v, 0.f);
            EXPECT_LE(v, 1.f);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Softmax, AllMaskedRowThrows) {
    const float ninf = -std::numeric_limits<float>::infinity();
    Tensor x = Tensor::from_data({1, 2}, {ninf, ninf});
    EXPECT_THROW(softmax_rows(x), std::runtime_error);
}

// --- layernorm ---

TEST(LayerNorm, ConstantInputCollapsesToBeta) {
    Tensor x = Tensor::filled({1, 3, 2, 2}, 5.f);
    Tensor y = layernorm(x, Tensor::ones({3}), Tensor::zeros({3}));
    for (float v : y.data()) EXPECT_NEAR(v, 0.f, 1e-5);

    Tensor beta = Tensor::filled({3}, 0.7f);
    Tensor z = layernorm(x, Tensor::zeros({3}), beta);
    for (float v : z.data()) EXPECT_FLOAT_EQ(v, 0.7f);
}

TEST(LayerNorm, TwoChannelClosedForm) {
    // channels [1,3] at one pixel: mean 2, population std 1 -> [-1, 1]
    Tensor x = Tensor::from_data({1, 2, 1, 1}, {1.f, 3.f});
    Tensor y = layernorm(x, Tensor::ones({2}), Tensor::zeros({2}), 1e-12f);
    EXPECT_NEAR(y.ptr()[0], -1.f, 1e-4);
    EXPECT_NEAR(y.ptr()[1], 1.f, 1e-4);
}

// --- matmul ---

TEST(Matmul, IdentityTimesA) {
    Rng rng(5);
    Tensor a = Tensor::rand_uniform({3, 4}, rng);
    Tensor eye = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i) eye.ptr()[i * 3 + i] = 1.f;
    Tensor y = matmul(eye, a);
    EXPECT_EQ(y.data(), a.data());
}

TEST(Matmul, HandSum) {
    Tensor a = Tensor::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f});
    Tensor b = Tensor::from_data({2, 1}, {1.f, 1.f});
    Tensor y = matmul(a, b);
    EXPECT_FLOAT_EQ(y.ptr()[0], 3.f);
    EXPECT_FLOAT_EQ(y.ptr()[1], 7.f);
}

TEST(Matmul, MatchesTripleLoopOracle) {
    Rng rng(7);
    Tensor a = Tensor::randn({5, 7}, rng);
    Tensor b = Tensor::randn({7, 3}, rng);
    Tensor y = matmul(a, b);
    const auto expect = oracle::naive_matmul(a.data(), b.data(), 5, 7, 3);
    // Fixed i-k-j accumulation differs from the oracle's dot-product order
    // only by float reassociation; both run the same math.
    for (int64_t i = 0; i < y.numel(); ++i)
        EXPECT_NEAR(y.ptr()[i], expect[i], 1e-5) << "at " << i;
}

TEST(Matmul, InnerDimMismatchThrows) {
    EXPECT_THROW(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 2})),
                 std::runtime_error);
}

TEST(Matmul, BatchBroadcast) {
    Rng rng(9);
    Tensor a = Tensor::randn({3, 4}, rng);
    Tensor b = Tensor::randn({2, 4, 2}, rng);
    Tensor y = matmul(a, b);
    ASSERT_EQ(y.shape(), (Shape{2, 3, 2}));
    for (int64_t bi = 0; bi < 2; ++bi) {
        std::vector<float> bb(b.ptr() + bi * 8, b.ptr() + (bi + 1) * 8);
        const auto expect = oracle::naive_matmul(a.data(), bb, 3, 4, 2);
        for (int64_t i = 0; i < 6; ++i)
            EXPECT_NEAR(y.ptr()[bi * 6 + i], expect[i], 1e-5);
    }
}

// --- conv2d ---

TEST(Conv2d, DeltaKernelIsIdentityAllPaddings) {
    Rng rng(13);
    Tensor x = Tensor::rand_uniform({1, 2, 6, 6}, rng);
    Tensor w = Tensor::zeros({2, 2, 3, 3});
    // per-channel delta: w[c][c][1][1] = 1
    for (int c = 0; c < 2; ++c) w.ptr()[((c * 2 + c) * 3 + 1) * 3 + 1] = 1.f;
    for (Pad mode : {Pad::Zeros, Pad::Reflect, Pad::Circular}) {
        Tensor y = conv2d(x, w, Tensor{}, mode);
        EXPECT_EQ(y.data(), x.data());
    }
}

TEST(Conv2d, OneByOneScaling) {
    Tensor x = Tensor::filled({1, 1, 3, 3}, 0.5f);
    Tensor w = Tensor::filled({1, 1, 1, 1}, 2.f);
    Tensor y = conv2d(x, w);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 1.f);
}

TEST(Conv2d, AllOnesKernelZeroPadding) {
    // 2x2 input [[1,2],[3,4]], 3x3 ones kernel, zero padding -> all 10.
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    Tensor w = Tensor::ones({1, 1, 3, 3});
    Tensor y = conv2d(x, w, Tensor{}, Pad::Zeros);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 10.f);
}

TEST(Conv2d, MatchesBruteForceOracle) {
    Rng rng(17);
    for (Pad mode : {Pad::Zeros, Pad::Reflect, Pad::Circular}) {
        Tensor x = Tensor::randn({2, 3, 5, 4}, rng);
        Tensor w = Tensor::randn({4, 3, 3, 3}, rng);
        Tensor b = Tensor::randn({4}, rng);
        Tensor y = conv2d(x, w, b, mode);
        Tensor ref = oracle::naive_conv2d(x, w, b, mode, 1);
        for (int64_t i = 0; i < y.numel(); ++i)
            EXPECT_NEAR(y.ptr()[i], ref.ptr()[i], 1e-4) << "mode " << int(mode);
    }
}

TEST(Conv2d, DepthwiseMatchesOracle) {
    Rng rng(19);
    Tensor x = Tensor::randn({1, 4, 5, 5}, rng);
    Tensor w = Tensor::randn({4, 1, 3, 3}, rng);
    Tensor y = conv2d(x, w, Tensor{}, Pad::Zeros, /*groups=*/4);
    Tensor ref = oracle::naive_conv2d(x, w, Tensor{}, Pad::Zeros, 4);
    for (int64_t i = 0; i < y.numel(); ++i) EXPECT_NEAR(y.ptr()[i], ref.ptr()[i], 1e-5);
}

TEST(Conv2d, ShapeErrorsNameOffendingDimension) {
    Tensor x = Tensor::zeros({1, 3, 4, 4});
    Tensor w = Tensor::zeros({2, 2, 3, 3});
    try {
        conv2d(x, w);
        FAIL() << "expected shape error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
    }
    EXPECT_THROW(conv2d(x, Tensor::zeros({2, 3, 2, 2})), std::runtime_error);  // even kernel
}

// --- resample / pixel shuffle ---

TEST(Resample, PixelUnshuffleKnownBlock) {
    // 2x2 block [[1,2],[3,4]] lands in channels (0,1,2,3) at the same pixel.
    Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
    Tensor y = pixel_unshuffle(x);
    ASSERT_EQ(y.shape(), (Shape{1, 4, 1, 1}));
    EXPECT_FLOAT_EQ(y.ptr()[0], 1.f);
    EXPECT_FLOAT_EQ(y.ptr()[1], 2.f);
    EXPECT_FLOAT_EQ(y.ptr()[2], 3.f);
    EXPECT_FLOAT_EQ(y.ptr()[3], 4.f);
}

TEST(Resample, ShuffleUnshuffleInverse) {
    Rng rng(23);
    Tensor x = Tensor::randn({2, 8, 6, 4}, rng);
    EXPECT_EQ(pixel_shuffle(pixel_unshuffle(x)).data(), x.data());
    EXPECT_EQ(pixel_unshuffle(pixel_shuffle(x)).data(), x.data());
}

TEST(Resample, OddExtentThrows) {
    EXPECT_THROW(pixel_unshuffle(Tensor::zeros({1, 1, 3, 4})), std::runtime_error);
    EXPECT_THROW(pixel_unshuffle(Tensor::zeros({1, 1, 4, 5})), std::runtime_error);
}

// --- structure ops ---

TEST(Structure, ConcatSliceRoundtrip) {
    Rng rng(29);
    Tensor a = Tensor::randn({1, 2, 3, 3}, rng);
    Tensor b = Tensor::randn({1, 3, 3, 3}, rng);
    Tensor cat = concat_channels<float>({a, b});
    ASSERT_EQ(cat.shape(), (Shape{1, 5, 3, 3}));
    EXPECT_EQ(slice_channels(cat, 0, 2).data(), a.data());
    EXPECT_EQ(slice_channels(cat, 2, 5).data(), b.data());
}

TEST(Structure, TopkFreezeOffByDefault) {
    EXPECT_EQ(TopkFreeze::get().state, TopkFreeze::State::Off);
}

// --- determinism ---

TEST(Determinism, RepeatedOpsAreBitIdentical) {
    Rng rng(31);
    Tensor x = Tensor::randn({2, 3, 8, 8}, rng);
    Tensor w = Tensor::randn({5, 3, 3, 3}, rng);
    Tensor b = Tensor::randn({5}, rng);
    Tensor y1 = conv2d(x, w, b, Pad::Reflect);
    Tensor y2 = conv2d(x, w, b, Pad::Reflect);
    EXPECT_EQ(y1.data(), y2.data());

    Tensor s1 = softmax_rows(reshape(y1, {5, 2 * 64}));
    Tensor s2 = softmax_rows(reshape(y2, {5, 2 * 64}));
    EXPECT_EQ(s1.data(), s2.data());
}
