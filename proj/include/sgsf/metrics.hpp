#pragma once

#include "sgsf/ops.hpp"

namespace sgsf {

/// PSNR in dB over [0,1] images, MSE floored at 1e-10 (identical inputs give
/// exactly 100 dB). Accumulates in double.
template <class T>
double psnr(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "psnr");
    double mse = 0.0;
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a.ptr()[i]) - static_cast<double>(b.ptr()[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    return 10.0 * std::log10(1.0 / std::max(mse, 1e-10));
}

namespace detail {

template <class T>
TensorT<T> gaussian_window(int64_t size, double sigma) {
    TensorT<T> w = TensorT<T>::zeros({3, 1, size, size});
    const int64_t r = size / 2;
    double sum = 0.0;
    std::vector<double> k(size * size);
    for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y - r), dx = static_cast<double>(x - r);
            k[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
            sum += k[y * size + x];
        }
    for (auto& v : k) v /= sum;
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < size * size; ++i)
            w.ptr()[c * size * size + i] = static_cast<T>(k[i]);
    return w;
}

}  // namespace detail

/// Differentiable mean SSIM over RGB [N,3,H,W] (or [3,H,W]) pairs:
/// 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, data range 1, windows
/// reflect-padded so constant images keep their closed-form statistics.
template <class T>
TensorT<T> ssim_tensor(const TensorT<T>& a_in, const TensorT<T>& b_in) {
    detail::check_same_shape(a_in, b_in, "ssim");
    TensorT<T> a = a_in, b = b_in;
    if (a.rank() == 3) {
        a = reshape(a, {1, a.dim(0), a.dim(1), a.dim(2)});
        b = reshape(b, {1, b.dim(0), b.dim(1), b.dim(2)});
    }
    SGSF_CHECK(a.rank() == 4 && a.dim(1) == 3, "ssim expects RGB images");
    static const T kC1 = T(0.01 * 0.01);
    static const T kC2 = T(0.03 * 0.03);
    TensorT<T> window = detail::gaussian_window<T>(11, 1.5);
    auto blur = [&](const TensorT<T>& x) {
        return conv2d(x, window, TensorT<T>{}, Pad::Reflect, /*groups=*/3);
    };
    TensorT<T> mu_a = blur(a), mu_b = blur(b);
    TensorT<T> mu_aa = mul(mu_a, mu_a), mu_bb = mul(mu_b, mu_b), mu_ab = mul(mu_a, mu_b);
    TensorT<T> var_a = sub(blur(mul(a, a)), mu_aa);
    TensorT<T> var_b = sub(blur(mul(b, b)), mu_bb);
    TensorT<T> cov = sub(blur(mul(a, b)), mu_ab);
    TensorT<T> num = mul(add_scalar(mul_scalar(mu_ab, T(2)), kC1),
                         add_scalar(mul_scalar(cov, T(2)), kC2));
    TensorT<T> den = mul(add_scalar(add(mu_aa, mu_bb), kC1),
                         add_scalar(add(var_a, var_b), kC2));
    return mean_all(div(num, den));
}

/// Metric entry point: evaluates the SSIM graph in 64-bit so the variance
/// terms of near-constant regions are not swamped by accumulation noise.
template <class T>
double ssim(const TensorT<T>& a, const TensorT<T>& b) {
    NoGradGuard ng;
    return ssim_tensor(a.template cast<double>(), b.template cast<double>()).item();
}

}  // namespace sgsf
