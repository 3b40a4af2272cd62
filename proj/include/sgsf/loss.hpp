#pragma once

#include "sgsf/metrics.hpp"

namespace sgsf {

/// Loss term weights [l1, psnr, ssim, perceptual].
struct LossWeights {
    double l1 = 1.0;
    double psnr = 0.2;
    double ssim = 0.2;
    double perceptual = 1.0;

    static LossWeights early() { return {1.0, 0.2, 0.2, 1.0}; }
    static LossWeights late() { return {0.0, 0.2, 0.1, 1.0}; }
};

/// Frozen random-weight conv pyramid standing in for pretrained perceptual
/// features: three stages of reflect-padded 3x3 conv (no bias) + ReLU, with
/// 2x average pooling between stages. Weights are fixed by seed and never
/// trained; gradient flows to the compared images only.
template <class T>
struct PerceptualPyramidT {
    std::vector<TensorT<T>> weights;  // [Co,Ci,3,3] per stage

    explicit PerceptualPyramidT(uint64_t seed = 0x70657263ull) {
        Rng rng(seed);
        const int64_t widths[4] = {3, 8, 16, 32};
        for (int s = 0; s < 3; ++s) {
            const T stddev =
                static_cast<T>(std::sqrt(2.0 / static_cast<double>(widths[s] * 9)));
            weights.push_back(TensorT<T>::randn({widths[s + 1], widths[s], 3, 3}, rng,
                                                stddev));
        }
    }

    std::vector<TensorT<T>> features(const TensorT<T>& x) const {
        std::vector<TensorT<T>> feats;
        TensorT<T> h = x;
        for (size_t s = 0; s < weights.size(); ++s) {
            if (s > 0) h = avgpool2x2(h);
            h = relu(conv2d(h, weights[s], TensorT<T>{}, Pad::Reflect));
            feats.push_back(h);
        }
        return feats;
    }

    /// Mean absolute feature distance, averaged over the stages.
    TensorT<T> distance(const TensorT<T>& a, const TensorT<T>& b) const {
        auto fa = features(a);
        auto fb = features(b);
        TensorT<T> acc = mean_all(abs_val(sub(fa[0], fb[0])));
        for (size_t s = 1; s < fa.size(); ++s)
            acc = add(acc, mean_all(abs_val(sub(fa[s], fb[s]))));
        return mul_scalar(acc, T(1) / static_cast<T>(fa.size()));
    }
};

using PerceptualPyramid = PerceptualPyramidT<float>;

template <class T>
struct LossTerms {
    TensorT<T> l1, psnr_term, ssim_term, perc_term, total;
};

/// total = w.l1 * mean|d| + w.psnr * (-PSNR/40 with MSE floored at 1e-10)
///       + w.ssim * (1 - SSIM) + w.perceptual * pyramid distance.
template <class T>
LossTerms<T> loss_total(const TensorT<T>& i_r, const TensorT<T>& i_gt,
                        const LossWeights& w, const PerceptualPyramidT<T>& pyramid) {
    detail::check_same_shape(i_r, i_gt, "loss_total");
    LossTerms<T> terms;
    TensorT<T> diff = sub(i_r, i_gt);
    terms.l1 = mean_all(abs_val(diff));

    // -PSNR/40 = (10 / (40 ln 10)) * ln(max(MSE, 1e-10)); bounded in
    // [-2.5, 0] on [0,1] images.
    TensorT<T> mse = mean_all(mul(diff, diff));
    terms.psnr_term = mul_scalar(log_nat(clamp_min(mse, T(1e-10))),
                                 static_cast<T>(0.25 / std::log(10.0)));

    terms.ssim_term = add_scalar(mul_scalar(ssim_tensor(i_r, i_gt), T(-1)), T(1));
    terms.perc_term = pyramid.distance(i_r, i_gt);

    terms.total = add(
        add(mul_scalar(terms.l1, static_cast<T>(w.l1)),
            mul_scalar(terms.psnr_term, static_cast<T>(w.psnr))),
        add(mul_scalar(terms.ssim_term, static_cast<T>(w.ssim)),
            mul_scalar(terms.perc_term, static_cast<T>(w.perceptual))));
    return terms;
}

}  // namespace sgsf
