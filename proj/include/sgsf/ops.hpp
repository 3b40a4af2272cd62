#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgsf/tensor.hpp"

namespace sgsf {

enum class Pad { Zeros, Reflect, Circular };

namespace detail {

/// Spatial index mapping for padded convolution. Returns -1 when the tap
/// falls outside (zeros mode only).
inline int64_t map_index(int64_t i, int64_t n, Pad mode) {
    switch (mode) {
        case Pad::Zeros:
            return (i < 0 || i >= n) ? -1 : i;
        case Pad::Reflect:
            // Edge-excluding reflection: -1 -> 1, n -> n-2.
            while (i < 0 || i >= n) {
                if (i < 0) i = -i;
                if (i >= n) i = 2 * n - 2 - i;
            }
            return i;
        case Pad::Circular:
            i %= n;
            return i < 0 ? i + n : i;
    }
    return -1;
}

template <class T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* op) {
    SGSF_CHECK(a.shape() == b.shape(), op << ": broadcast mismatch "
                                          << shape_str(a.shape()) << " vs "
                                          << shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pointwise ops
// ---------------------------------------------------------------------------

template <class T, class Fwd, class Bwd>
TensorT<T> unary_op(const TensorT<T>& x, Fwd f, Bwd dfdx) {
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    const T* xv = x.ptr();
    T* yv = y.ptr();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) yv[i] = f(xv[i]);
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), dfdx]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (size_t i = 0; i < yn->grad.size(); ++i)
            xn->grad[i] += yn->grad[i] * dfdx(xn->value[i], yn->value[i]);
    });
    return y;
}

template <class T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "add");
    TensorT<T> y = TensorT<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.ptr()[i] = a.ptr()[i] + b.ptr()[i];
    detail::attach_tape<T>(y, {a, b}, [an = a.node(), bn = b.node(), yn = y.node().get()]() {
        detail::accumulate(an, yn->grad);
        detail::accumulate(bn, yn->grad);
    });
    return y;
}

template <class T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "sub");
    TensorT<T> y = TensorT<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.ptr()[i] = a.ptr()[i] - b.ptr()[i];
    detail::attach_tape<T>(y, {a, b}, [an = a.node(), bn = b.node(), yn = y.node().get()]() {
        detail::accumulate(an, yn->grad);
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i) bn->grad[i] -= yn->grad[i];
        }
    });
    return y;
}

template <class T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "mul");
    TensorT<T> y = TensorT<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.ptr()[i] = a.ptr()[i] * b.ptr()[i];
    detail::attach_tape<T>(y, {a, b}, [an = a.node(), bn = b.node(), yn = y.node().get()]() {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i)
                an->grad[i] += yn->grad[i] * bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i)
                bn->grad[i] += yn->grad[i] * an->value[i];
        }
    });
    return y;
}

template <class T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
    detail::check_same_shape(a, b, "div");
    TensorT<T> y = TensorT<T>::zeros(a.shape());
    const int64_t n = a.numel();
    for (int64_t i = 0; i < n; ++i) y.ptr()[i] = a.ptr()[i] / b.ptr()[i];
    detail::attach_tape<T>(y, {a, b}, [an = a.node(), bn = b.node(), yn = y.node().get()]() {
        if (an->requires_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i)
                an->grad[i] += yn->grad[i] / bn->value[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < yn->grad.size(); ++i)
                bn->grad[i] -= yn->grad[i] * yn->value[i] / bn->value[i];
        }
    });
    return y;
}

template <class T>
TensorT<T> add_scalar(const TensorT<T>& x, T c) {
    return unary_op(x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <class T>
TensorT<T> mul_scalar(const TensorT<T>& x, T c) {
    return unary_op(x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <class T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    return unary_op(
        x, [](T v) { return T(1) / (T(1) + std::exp(-v)); },
        [](T, T y) { return y * (T(1) - y); });
}

template <class T>
TensorT<T> relu(const TensorT<T>& x) {
    return unary_op(x, [](T v) { return v > T(0) ? v : T(0); },
                    [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
TensorT<T> gelu(const TensorT<T>& x) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    return unary_op(
        x,
        [](T v) {
            return static_cast<T>(0.5 * static_cast<double>(v) *
                                  (1.0 + std::erf(static_cast<double>(v) * inv_sqrt2)));
        },
        [](T v, T) {
            const double dv = static_cast<double>(v);
            const double cdf = 0.5 * (1.0 + std::erf(dv * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * dv * dv);
            return static_cast<T>(cdf + dv * pdf);
        });
}

template <class T>
TensorT<T> elu(const TensorT<T>& x) {
    return unary_op(x, [](T v) { return v > T(0) ? v : static_cast<T>(std::expm1(v)); },
                    [](T v, T y) { return v > T(0) ? T(1) : y + T(1); });
}

template <class T>
TensorT<T> abs_val(const TensorT<T>& x) {
    return unary_op(x, [](T v) { return std::abs(v); },
                    [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <class T>
TensorT<T> log_nat(const TensorT<T>& x) {
    return unary_op(x, [](T v) { return std::log(v); },
                    [](T v, T) { return T(1) / v; });
}

/// max(x, c); gradient flows only where x > c.
template <class T>
TensorT<T> clamp_min(const TensorT<T>& x, T c) {
    return unary_op(x, [c](T v) { return v > c ? v : c; },
                    [c](T v, T) { return v > c ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// Structure ops
// ---------------------------------------------------------------------------

/// Contiguous reinterpretation; element order is unchanged.
template <class T>
TensorT<T> reshape(const TensorT<T>& x, Shape new_shape) {
    SGSF_CHECK(shape_numel(new_shape) == x.numel(),
               "reshape: cannot view " << shape_str(x.shape()) << " as "
                                       << shape_str(new_shape));
    TensorT<T> y = TensorT<T>::from_data(std::move(new_shape), x.data());
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get()]() {
        detail::accumulate(xn, yn->grad);
    });
    return y;
}

template <class T>
TensorT<T> concat_channels(const std::vector<TensorT<T>>& xs) {
    SGSF_CHECK(!xs.empty(), "concat_channels: empty input list");
    const Shape& s0 = xs[0].shape();
    SGSF_CHECK(s0.size() == 4, "concat_channels expects [N,C,H,W]");
    int64_t ctotal = 0;
    for (const auto& x : xs) {
        SGSF_CHECK(x.rank() == 4 && x.dim(0) == s0[0] && x.dim(2) == s0[2] &&
                       x.dim(3) == s0[3],
                   "concat_channels: incompatible shape " << shape_str(x.shape()));
        ctotal += x.dim(1);
    }
    const int64_t n = s0[0], hw = s0[2] * s0[3];
    TensorT<T> y = TensorT<T>::zeros({n, ctotal, s0[2], s0[3]});
    int64_t coff = 0;
    for (const auto& x : xs) {
        const int64_t c = x.dim(1);
        for (int64_t b = 0; b < n; ++b)
            std::copy(x.ptr() + b * c * hw, x.ptr() + (b + 1) * c * hw,
                      y.ptr() + (b * ctotal + coff) * hw);
        coff += c;
    }
    std::vector<std::shared_ptr<Node<T>>> nodes;
    std::vector<int64_t> widths;
    for (const auto& x : xs) {
        nodes.push_back(x.node());
        widths.push_back(x.dim(1));
    }
    detail::attach_tape<T>(y, xs, [nodes, widths, n, hw, ctotal, yn = y.node().get()]() {
        int64_t coff = 0;
        for (size_t i = 0; i < nodes.size(); ++i) {
            const int64_t c = widths[i];
            if (nodes[i]->requires_grad) {
                nodes[i]->ensure_grad();
                for (int64_t b = 0; b < n; ++b) {
                    const T* g = yn->grad.data() + (b * ctotal + coff) * hw;
                    T* dst = nodes[i]->grad.data() + b * c * hw;
                    for (int64_t j = 0; j < c * hw; ++j) dst[j] += g[j];
                }
            }
            coff += c;
        }
    });
    return y;
}

template <class T>
TensorT<T> slice_channels(const TensorT<T>& x, int64_t c0, int64_t c1) {
    SGSF_CHECK(x.rank() == 4, "slice_channels expects [N,C,H,W]");
    SGSF_CHECK(0 <= c0 && c0 < c1 && c1 <= x.dim(1),
               "slice_channels: bad range [" << c0 << "," << c1 << ") for C="
                                             << x.dim(1));
    const int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    const int64_t cs = c1 - c0;
    TensorT<T> y = TensorT<T>::zeros({n, cs, x.dim(2), x.dim(3)});
    for (int64_t b = 0; b < n; ++b)
        std::copy(x.ptr() + (b * c + c0) * hw, x.ptr() + (b * c + c1) * hw,
                  y.ptr() + b * cs * hw);
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n, c, c0, cs, hw]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int64_t b = 0; b < n; ++b) {
            const T* g = yn->grad.data() + b * cs * hw;
            T* dst = xn->grad.data() + (b * c + c0) * hw;
            for (int64_t j = 0; j < cs * hw; ++j) dst[j] += g[j];
        }
    });
    return y;
}

/// Space-to-depth, factor 2: [N,C,H,W] -> [N,4C,H/2,W/2]. Lossless
/// permutation; out channel c*4 + dy*2 + dx holds in[c] at offset (dy,dx).
template <class T>
TensorT<T> pixel_unshuffle(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() == 4, "pixel_unshuffle expects [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(h % 2 == 0 && w % 2 == 0,
               "pixel_unshuffle: odd spatial extent " << h << "x" << w);
    const int64_t ho = h / 2, wo = w / 2;
    TensorT<T> y = TensorT<T>::zeros({n, 4 * c, ho, wo});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ci = 0; ci < c; ++ci)
            for (int64_t dy = 0; dy < 2; ++dy)
                for (int64_t dx = 0; dx < 2; ++dx) {
                    const int64_t co = ci * 4 + dy * 2 + dx;
                    for (int64_t oy = 0; oy < ho; ++oy) {
                        const T* src = x.ptr() + ((b * c + ci) * h + 2 * oy + dy) * w + dx;
                        T* dst = y.ptr() + ((b * 4 * c + co) * ho + oy) * wo;
                        for (int64_t ox = 0; ox < wo; ++ox) dst[ox] = src[2 * ox];
                    }
                }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n, c, h, w]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const int64_t ho = h / 2, wo = w / 2;
        for (int64_t b = 0; b < n; ++b)
            for (int64_t ci = 0; ci < c; ++ci)
                for (int64_t dy = 0; dy < 2; ++dy)
                    for (int64_t dx = 0; dx < 2; ++dx) {
                        const int64_t co = ci * 4 + dy * 2 + dx;
                        for (int64_t oy = 0; oy < ho; ++oy) {
                            const T* g = yn->grad.data() + ((b * 4 * c + co) * ho + oy) * wo;
                            T* dst = xn->grad.data() + ((b * c + ci) * h + 2 * oy + dy) * w + dx;
                            for (int64_t ox = 0; ox < wo; ++ox) dst[2 * ox] += g[ox];
                        }
                    }
    });
    return y;
}

/// Depth-to-space, factor 2: [N,C,H,W] -> [N,C/4,2H,2W]. Inverse of
/// pixel_unshuffle.
template <class T>
TensorT<T> pixel_shuffle(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() == 4, "pixel_shuffle expects [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(c % 4 == 0, "pixel_shuffle: channel count " << c << " not divisible by 4");
    const int64_t co = c / 4, ho = 2 * h, wo = 2 * w;
    TensorT<T> y = TensorT<T>::zeros({n, co, ho, wo});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t ci = 0; ci < co; ++ci)
            for (int64_t dy = 0; dy < 2; ++dy)
                for (int64_t dx = 0; dx < 2; ++dx) {
                    const int64_t cin = ci * 4 + dy * 2 + dx;
                    for (int64_t iy = 0; iy < h; ++iy) {
                        const T* src = x.ptr() + ((b * c + cin) * h + iy) * w;
                        T* dst = y.ptr() + ((b * co + ci) * ho + 2 * iy + dy) * wo + dx;
                        for (int64_t ix = 0; ix < w; ++ix) dst[2 * ix] = src[ix];
                    }
                }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n, c, h, w]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const int64_t co = c / 4, ho = 2 * h, wo = 2 * w;
        for (int64_t b = 0; b < n; ++b)
            for (int64_t ci = 0; ci < co; ++ci)
                for (int64_t dy = 0; dy < 2; ++dy)
                    for (int64_t dx = 0; dx < 2; ++dx) {
                        const int64_t cin = ci * 4 + dy * 2 + dx;
                        for (int64_t iy = 0; iy < h; ++iy) {
                            const T* g = yn->grad.data() + ((b * co + ci) * ho + 2 * iy + dy) * wo + dx;
                            T* dst = xn->grad.data() + ((b * c + cin) * h + iy) * w;
                            for (int64_t ix = 0; ix < w; ++ix) dst[ix] += g[2 * ix];
                        }
                    }
    });
    return y;
}

template <class T>
TensorT<T> avgpool2x2(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() == 4, "avgpool2x2 expects [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(h % 2 == 0 && w % 2 == 0, "avgpool2x2: odd spatial extent");
    const int64_t ho = h / 2, wo = w / 2;
    TensorT<T> y = TensorT<T>::zeros({n, c, ho, wo});
    for (int64_t bc = 0; bc < n * c; ++bc)
        for (int64_t oy = 0; oy < ho; ++oy)
            for (int64_t ox = 0; ox < wo; ++ox) {
                const T* p = x.ptr() + (bc * h + 2 * oy) * w + 2 * ox;
                y.ptr()[(bc * ho + oy) * wo + ox] =
                    (p[0] + p[1] + p[w] + p[w + 1]) * T(0.25);
            }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n, c, h, w]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const int64_t ho = h / 2, wo = w / 2;
        for (int64_t bc = 0; bc < n * c; ++bc)
            for (int64_t oy = 0; oy < ho; ++oy)
                for (int64_t ox = 0; ox < wo; ++ox) {
                    const T g = yn->grad[(bc * ho + oy) * wo + ox] * T(0.25);
                    T* p = xn->grad.data() + (bc * h + 2 * oy) * w + 2 * ox;
                    p[0] += g;
                    p[1] += g;
                    p[w] += g;
                    p[w + 1] += g;
                }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Reductions and broadcasts
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> mean_all(const TensorT<T>& x) {
    const int64_t n = x.numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += x.ptr()[i];
    TensorT<T> y = TensorT<T>::scalar(acc / static_cast<T>(n));
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T g = yn->grad[0] / static_cast<T>(n);
        for (int64_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
    return y;
}

template <class T>
TensorT<T> sum_all(const TensorT<T>& x) {
    const int64_t n = x.numel();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += x.ptr()[i];
    TensorT<T> y = TensorT<T>::scalar(acc);
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), n]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        const T g = yn->grad[0];
        for (int64_t i = 0; i < n; ++i) xn->grad[i] += g;
    });
    return y;
}

/// Global average pool: [N,C,H,W] -> [N,C,1,1].
template <class T>
TensorT<T> mean_spatial(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() == 4, "mean_spatial expects [N,C,H,W]");
    const int64_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
    TensorT<T> y = TensorT<T>::zeros({x.dim(0), x.dim(1), 1, 1});
    for (int64_t i = 0; i < nc; ++i) {
        T acc = T(0);
        const T* p = x.ptr() + i * hw;
        for (int64_t j = 0; j < hw; ++j) acc += p[j];
        y.ptr()[i] = acc / static_cast<T>(hw);
    }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), nc, hw]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int64_t i = 0; i < nc; ++i) {
            const T g = yn->grad[i] / static_cast<T>(hw);
            T* p = xn->grad.data() + i * hw;
            for (int64_t j = 0; j < hw; ++j) p[j] += g;
        }
    });
    return y;
}

/// x[N,C,H,W] * s[N,C,1,1], broadcast over the spatial axes.
template <class T>
TensorT<T> mul_channelwise(const TensorT<T>& x, const TensorT<T>& s) {
    SGSF_CHECK(x.rank() == 4 && s.rank() == 4 && s.dim(2) == 1 && s.dim(3) == 1 &&
                   s.dim(0) == x.dim(0) && s.dim(1) == x.dim(1),
               "mul_channelwise: shapes " << shape_str(x.shape()) << " vs "
                                          << shape_str(s.shape()));
    const int64_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    for (int64_t i = 0; i < nc; ++i) {
        const T sv = s.ptr()[i];
        const T* p = x.ptr() + i * hw;
        T* q = y.ptr() + i * hw;
        for (int64_t j = 0; j < hw; ++j) q[j] = p[j] * sv;
    }
    detail::attach_tape<T>(y, {x, s}, [xn = x.node(), sn = s.node(), yn = y.node().get(), nc, hw]() {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (int64_t i = 0; i < nc; ++i) {
                const T sv = sn->value[i];
                const T* g = yn->grad.data() + i * hw;
                T* dst = xn->grad.data() + i * hw;
                for (int64_t j = 0; j < hw; ++j) dst[j] += g[j] * sv;
            }
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            for (int64_t i = 0; i < nc; ++i) {
                const T* g = yn->grad.data() + i * hw;
                const T* xv = xn->value.data() + i * hw;
                T acc = T(0);
                for (int64_t j = 0; j < hw; ++j) acc += g[j] * xv[j];
                sn->grad[i] += acc;
            }
        }
    });
    return y;
}

/// x[B,heads,M,N] * t[heads] with a learnable per-head scale.
template <class T>
TensorT<T> mul_headwise(const TensorT<T>& x, const TensorT<T>& t) {
    SGSF_CHECK(x.rank() == 4 && t.rank() == 1 && t.dim(0) == x.dim(1),
               "mul_headwise: shapes " << shape_str(x.shape()) << " vs "
                                       << shape_str(t.shape()));
    const int64_t b = x.dim(0), heads = x.dim(1), mn = x.dim(2) * x.dim(3);
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    for (int64_t i = 0; i < b; ++i)
        for (int64_t h = 0; h < heads; ++h) {
            const T tv = t.ptr()[h];
            const T* p = x.ptr() + (i * heads + h) * mn;
            T* q = y.ptr() + (i * heads + h) * mn;
            for (int64_t j = 0; j < mn; ++j) q[j] = p[j] * tv;
        }
    detail::attach_tape<T>(y, {x, t}, [xn = x.node(), tn = t.node(), yn = y.node().get(), b, heads, mn]() {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (int64_t i = 0; i < b; ++i)
                for (int64_t h = 0; h < heads; ++h) {
                    const T tv = tn->value[h];
                    const T* g = yn->grad.data() + (i * heads + h) * mn;
                    T* dst = xn->grad.data() + (i * heads + h) * mn;
                    for (int64_t j = 0; j < mn; ++j) dst[j] += g[j] * tv;
                }
        }
        if (tn->requires_grad) {
            tn->ensure_grad();
            for (int64_t i = 0; i < b; ++i)
                for (int64_t h = 0; h < heads; ++h) {
                    const T* g = yn->grad.data() + (i * heads + h) * mn;
                    const T* xv = xn->value.data() + (i * heads + h) * mn;
                    T acc = T(0);
                    for (int64_t j = 0; j < mn; ++j) acc += g[j] * xv[j];
                    tn->grad[h] += acc;
                }
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

namespace detail {

inline Shape broadcast_batch(const Shape& a, const Shape& b) {
    const size_t ra = a.size(), rb = b.size();
    const size_t r = std::max(ra, rb);
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
        const int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
        SGSF_CHECK(da == db || da == 1 || db == 1,
                   "matmul: batch extents not broadcastable: " << shape_str(a)
                                                               << " vs " << shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

/// Maps a flat batch index in the broadcast shape to the flat index in a
/// participant's (right-aligned, possibly smaller) batch shape.
inline int64_t batch_offset(int64_t flat, const Shape& bc, const Shape& own) {
    int64_t off = 0, stride = 1;
    const size_t r = bc.size(), ro = own.size();
    for (size_t i = r; i-- > 0;) {
        const int64_t idx = flat % bc[i];
        flat /= bc[i];
        if (i >= r - ro) {
            const int64_t d = own[i - (r - ro)];
            off += (d == 1 ? 0 : idx) * stride;
            stride *= d;
        }
    }
    return off;
}

}  // namespace detail

/// Batched matrix product a[...,M,K] x b[...,K,N] -> [...,M,N], batch dims
/// broadcastable. Fixed i-k-j accumulation order.
template <class T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    SGSF_CHECK(a.rank() >= 2 && b.rank() >= 2, "matmul expects rank >= 2");
    const int64_t m = a.dim(a.rank() - 2), k = a.dim(a.rank() - 1);
    const int64_t kb = b.dim(b.rank() - 2), n = b.dim(b.rank() - 1);
    SGSF_CHECK(k == kb, "matmul: inner extents disagree (" << k << " vs " << kb << ")");
    Shape ba(a.shape().begin(), a.shape().end() - 2);
    Shape bb(b.shape().begin(), b.shape().end() - 2);
    const Shape bc = detail::broadcast_batch(ba, bb);
    const int64_t nbatch = shape_numel(bc);

    Shape out_shape = bc;
    out_shape.push_back(m);
    out_shape.push_back(n);
    TensorT<T> y = TensorT<T>::zeros(out_shape);

    for (int64_t bi = 0; bi < nbatch; ++bi) {
        const T* pa = a.ptr() + detail::batch_offset(bi, bc, ba) * m * k;
        const T* pb = b.ptr() + detail::batch_offset(bi, bc, bb) * k * n;
        T* py = y.ptr() + bi * m * n;
        for (int64_t i = 0; i < m; ++i)
            for (int64_t kk = 0; kk < k; ++kk) {
                const T av = pa[i * k + kk];
                const T* pbr = pb + kk * n;
                T* pyr = py + i * n;
                for (int64_t j = 0; j < n; ++j) pyr[j] += av * pbr[j];
            }
    }

    detail::attach_tape<T>(y, {a, b},
                           [an = a.node(), bn = b.node(), yn = y.node().get(), ba, bb, bc, m, k, n, nbatch]() {
        if (an->requires_grad) an->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (int64_t bi = 0; bi < nbatch; ++bi) {
            const int64_t oa = detail::batch_offset(bi, bc, ba) * m * k;
            const int64_t ob = detail::batch_offset(bi, bc, bb) * k * n;
            const T* g = yn->grad.data() + bi * m * n;
            if (an->requires_grad) {
                // ga += g @ b^T
                const T* pb = bn->value.data() + ob;
                T* ga = an->grad.data() + oa;
                for (int64_t i = 0; i < m; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) {
                        T acc = T(0);
                        const T* gr = g + i * n;
                        const T* pbr = pb + kk * n;
                        for (int64_t j = 0; j < n; ++j) acc += gr[j] * pbr[j];
                        ga[i * k + kk] += acc;
                    }
            }
            if (bn->requires_grad) {
                // gb += a^T @ g
                const T* pa = an->value.data() + oa;
                T* gb = bn->grad.data() + ob;
                for (int64_t kk = 0; kk < k; ++kk)
                    for (int64_t i = 0; i < m; ++i) {
                        const T av = pa[i * k + kk];
                        const T* gr = g + i * n;
                        T* gbr = gb + kk * n;
                        for (int64_t j = 0; j < n; ++j) gbr[j] += av * gr[j];
                    }
            }
        }
    });
    return y;
}

template <class T>
TensorT<T> transpose_last2(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() >= 2, "transpose_last2 expects rank >= 2");
    const int64_t m = x.dim(x.rank() - 2), n = x.dim(x.rank() - 1);
    Shape out_shape = x.shape();
    std::swap(out_shape[out_shape.size() - 2], out_shape[out_shape.size() - 1]);
    const int64_t nbatch = x.numel() / (m * n);
    TensorT<T> y = TensorT<T>::zeros(out_shape);
    for (int64_t b = 0; b < nbatch; ++b) {
        const T* p = x.ptr() + b * m * n;
        T* q = y.ptr() + b * m * n;
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j) q[j * m + i] = p[i * n + j];
    }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), m, n, nbatch]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int64_t b = 0; b < nbatch; ++b) {
            const T* g = yn->grad.data() + b * m * n;
            T* dst = xn->grad.data() + b * m * n;
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n; ++j) dst[i * n + j] += g[j * m + i];
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Normalizations and softmax
// ---------------------------------------------------------------------------

/// Row-stabilized softmax along the last axis. Entries equal to -inf map to
/// exactly 0; a row with no finite entry is an error.
template <class T>
TensorT<T> softmax_rows(const TensorT<T>& x) {
    SGSF_CHECK(x.rank() >= 1, "softmax_rows expects rank >= 1");
    const int64_t n = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / n;
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    constexpr T ninf = -std::numeric_limits<T>::infinity();
    for (int64_t r = 0; r < rows; ++r) {
        const T* p = x.ptr() + r * n;
        T* q = y.ptr() + r * n;
        T mx = ninf;
        for (int64_t j = 0; j < n; ++j)
            if (p[j] > mx) mx = p[j];
        SGSF_CHECK(std::isfinite(static_cast<double>(mx)),
                   "softmax_rows: row " << r << " has no finite entry");
        T sum = T(0);
        for (int64_t j = 0; j < n; ++j) {
            q[j] = p[j] == ninf ? T(0) : std::exp(p[j] - mx);
            sum += q[j];
        }
        const T inv = T(1) / sum;
        for (int64_t j = 0; j < n; ++j) q[j] *= inv;
    }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), rows, n]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const T* g = yn->grad.data() + r * n;
            const T* yv = yn->value.data() + r * n;
            T dot = T(0);
            for (int64_t j = 0; j < n; ++j) dot += g[j] * yv[j];
            T* dst = xn->grad.data() + r * n;
            for (int64_t j = 0; j < n; ++j) dst[j] += yv[j] * (g[j] - dot);
        }
    });
    return y;
}

/// Per-pixel layer normalization over the channel axis of [N,C,H,W].
template <class T>
TensorT<T> layernorm(const TensorT<T>& x, const TensorT<T>& gamma,
                     const TensorT<T>& beta, T eps = T(1e-5)) {
    SGSF_CHECK(x.rank() == 4, "layernorm expects [N,C,H,W]");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(gamma.rank() == 1 && gamma.dim(0) == c, "layernorm: gamma shape "
                                                           << shape_str(gamma.shape())
                                                           << " vs C=" << c);
    SGSF_CHECK(beta.rank() == 1 && beta.dim(0) == c, "layernorm: beta shape "
                                                         << shape_str(beta.shape())
                                                         << " vs C=" << c);
    SGSF_CHECK(eps > T(0), "layernorm: eps must be > 0");
    const int64_t hw = h * w;
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    // Saved statistics per (n, h, w) pixel for the backward pass.
    auto inv_std = std::make_shared<std::vector<T>>(n * hw);
    auto mean = std::make_shared<std::vector<T>>(n * hw);
    for (int64_t b = 0; b < n; ++b)
        for (int64_t j = 0; j < hw; ++j) {
            const T* p = x.ptr() + b * c * hw + j;
            T mu = T(0);
            for (int64_t ci = 0; ci < c; ++ci) mu += p[ci * hw];
            mu /= static_cast<T>(c);
            T var = T(0);
            for (int64_t ci = 0; ci < c; ++ci) {
                const T d = p[ci * hw] - mu;
                var += d * d;
            }
            var /= static_cast<T>(c);
            const T is = T(1) / std::sqrt(var + eps);
            (*mean)[b * hw + j] = mu;
            (*inv_std)[b * hw + j] = is;
            T* q = y.ptr() + b * c * hw + j;
            for (int64_t ci = 0; ci < c; ++ci)
                q[ci * hw] = gamma.ptr()[ci] * (p[ci * hw] - mu) * is + beta.ptr()[ci];
        }
    detail::attach_tape<T>(y, {x, gamma, beta},
                           [xn = x.node(), gn = gamma.node(), bn = beta.node(),
                            yn = y.node().get(), mean, inv_std, n, c, hw]() {
        if (xn->requires_grad) xn->ensure_grad();
        if (gn->requires_grad) gn->ensure_grad();
        if (bn->requires_grad) bn->ensure_grad();
        for (int64_t b = 0; b < n; ++b)
            for (int64_t j = 0; j < hw; ++j) {
                const T mu = (*mean)[b * hw + j];
                const T is = (*inv_std)[b * hw + j];
                const T* xp = xn->value.data() + b * c * hw + j;
                const T* gp = yn->grad.data() + b * c * hw + j;
                // dgamma/dbeta and the two row sums needed for dx.
                T sum_g = T(0), sum_gx = T(0);
                for (int64_t ci = 0; ci < c; ++ci) {
                    const T xhat = (xp[ci * hw] - mu) * is;
                    const T gg = gp[ci * hw] * gn->value[ci];
                    sum_g += gg;
                    sum_gx += gg * xhat;
                    if (gn->requires_grad) gn->grad[ci] += gp[ci * hw] * xhat;
                    if (bn->requires_grad) bn->grad[ci] += gp[ci * hw];
                }
                if (xn->requires_grad) {
                    T* dst = xn->grad.data() + b * c * hw + j;
                    const T invc = T(1) / static_cast<T>(c);
                    for (int64_t ci = 0; ci < c; ++ci) {
                        const T xhat = (xp[ci * hw] - mu) * is;
                        const T gg = gp[ci * hw] * gn->value[ci];
                        dst[ci * hw] += is * (gg - invc * sum_g - xhat * invc * sum_gx);
                    }
                }
            }
    });
    return y;
}

/// L2 normalization along the last axis: y = x / sqrt(sum(x^2) + eps).
template <class T>
TensorT<T> l2_normalize_rows(const TensorT<T>& x, T eps = T(1e-12)) {
    const int64_t n = x.dim(x.rank() - 1);
    const int64_t rows = x.numel() / n;
    TensorT<T> y = TensorT<T>::zeros(x.shape());
    auto inv_norm = std::make_shared<std::vector<T>>(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const T* p = x.ptr() + r * n;
        T s = T(0);
        for (int64_t j = 0; j < n; ++j) s += p[j] * p[j];
        const T inv = T(1) / std::sqrt(s + eps);
        (*inv_norm)[r] = inv;
        T* q = y.ptr() + r * n;
        for (int64_t j = 0; j < n; ++j) q[j] = p[j] * inv;
    }
    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), inv_norm, rows, n]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const T inv = (*inv_norm)[r];
            const T* g = yn->grad.data() + r * n;
            const T* yv = yn->value.data() + r * n;
            T dot = T(0);
            for (int64_t j = 0; j < n; ++j) dot += g[j] * yv[j];
            T* dst = xn->grad.data() + r * n;
            for (int64_t j = 0; j < n; ++j) dst[j] += inv * (g[j] - yv[j] * dot);
        }
    });
    return y;
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// "Same" 2-D cross-correlation with odd kernels. groups == C gives the
/// depth-wise case. Gradient flows to input, weight and bias.
template <class T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias = {}, Pad mode = Pad::Zeros,
                  int64_t groups = 1) {
    SGSF_CHECK(input.rank() == 4, "conv2d: input must be [N,C,H,W], got "
                                      << shape_str(input.shape()));
    SGSF_CHECK(weight.rank() == 4, "conv2d: weight must be [Co,Ci,kh,kw], got "
                                       << shape_str(weight.shape()));
    const int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int64_t co = weight.dim(0), ci = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
    SGSF_CHECK(kh % 2 == 1 && kw % 2 == 1,
               "conv2d: kernel extents must be odd, got " << kh << "x" << kw);
    SGSF_CHECK(ci * groups == c, "conv2d: input channel dim " << c
                                     << " != weight Ci*groups = " << ci << "*" << groups);
    SGSF_CHECK(co % groups == 0, "conv2d: output channel dim " << co
                                     << " not divisible by groups " << groups);
    if (bias.defined())
        SGSF_CHECK(bias.rank() == 1 && bias.dim(0) == co,
                   "conv2d: bias shape " << shape_str(bias.shape()) << " vs Co=" << co);
    const int64_t ph = kh / 2, pw = kw / 2;
    const int64_t co_g = co / groups;

    // Row map per vertical tap; -1 marks a zero row. Columns are split into
    // [0,lo) | [lo,hi) | [hi,w): the middle segment maps to ix = ox + shift
    // directly and carries nearly all the work.
    std::vector<std::vector<int64_t>> rowmap(kh);
    for (int64_t ky = 0; ky < kh; ++ky) {
        rowmap[ky].resize(h);
        for (int64_t oy = 0; oy < h; ++oy)
            rowmap[ky][oy] = detail::map_index(oy + ky - ph, h, mode);
    }
    auto col_bounds = [w](int64_t shift, int64_t& lo, int64_t& hi) {
        lo = std::min<int64_t>(w, std::max<int64_t>(0, -shift));
        hi = std::min<int64_t>(w, std::max<int64_t>(0, w - shift));
    };

    TensorT<T> out = TensorT<T>::zeros({n, co, h, w});
    for (int64_t b = 0; b < n; ++b)
        for (int64_t g = 0; g < groups; ++g)
            for (int64_t oc = 0; oc < co_g; ++oc) {
                const int64_t ocg = g * co_g + oc;
                T* po = out.ptr() + ((b * co + ocg) * h) * w;
                if (bias.defined()) {
                    const T bv = bias.ptr()[ocg];
                    for (int64_t j = 0; j < h * w; ++j) po[j] = bv;
                }
                for (int64_t ic = 0; ic < ci; ++ic) {
                    const int64_t icg = g * ci + ic;
                    const T* pi = input.ptr() + ((b * c + icg) * h) * w;
                    const T* pw_ = weight.ptr() + ((ocg * ci + ic) * kh) * kw;
                    for (int64_t ky = 0; ky < kh; ++ky)
                        for (int64_t kx = 0; kx < kw; ++kx) {
                            const T wv = pw_[ky * kw + kx];
                            const int64_t shift = kx - pw;
                            int64_t lo, hi;
                            col_bounds(shift, lo, hi);
                            const auto& rm = rowmap[ky];
                            for (int64_t oy = 0; oy < h; ++oy) {
                                const int64_t iy = rm[oy];
                                if (iy < 0) continue;
                                const T* row = pi + iy * w;
                                T* orow = po + oy * w;
                                if (mode != Pad::Zeros)
                                    for (int64_t ox = 0; ox < lo; ++ox)
                                        orow[ox] += wv * row[detail::map_index(ox + shift, w, mode)];
                                for (int64_t ox = lo; ox < hi; ++ox)
                                    orow[ox] += wv * row[ox + shift];
                                if (mode != Pad::Zeros)
                                    for (int64_t ox = hi; ox < w; ++ox)
                                        orow[ox] += wv * row[detail::map_index(ox + shift, w, mode)];
                            }
                        }
                }
            }

    detail::attach_tape<T>(out, {input, weight, bias},
                           [in = input.node(), wn = weight.node(),
                            bn = bias.defined() ? bias.node() : nullptr,
                            on = out.node().get(), rowmap, col_bounds, mode, n, c, h, w,
                            co, ci, kh, kw, pw, co_g, groups]() {
        if (in->requires_grad) in->ensure_grad();
        if (wn->requires_grad) wn->ensure_grad();
        if (bn && bn->requires_grad) bn->ensure_grad();
        for (int64_t b = 0; b < n; ++b)
            for (int64_t g = 0; g < groups; ++g)
                for (int64_t oc = 0; oc < co_g; ++oc) {
                    const int64_t ocg = g * co_g + oc;
                    const T* go = on->grad.data() + ((b * co + ocg) * h) * w;
                    if (bn && bn->requires_grad) {
                        T acc = T(0);
                        for (int64_t j = 0; j < h * w; ++j) acc += go[j];
                        bn->grad[ocg] += acc;
                    }
                    for (int64_t ic = 0; ic < ci; ++ic) {
                        const int64_t icg = g * ci + ic;
                        const T* pi = in->value.data() + ((b * c + icg) * h) * w;
                        T* gi = in->requires_grad
                                    ? in->grad.data() + ((b * c + icg) * h) * w
                                    : nullptr;
                        const T* pw_ = wn->value.data() + ((ocg * ci + ic) * kh) * kw;
                        T* gw = wn->requires_grad
                                    ? wn->grad.data() + ((ocg * ci + ic) * kh) * kw
                                    : nullptr;
                        for (int64_t ky = 0; ky < kh; ++ky)
                            for (int64_t kx = 0; kx < kw; ++kx) {
                                const T wv = pw_[ky * kw + kx];
                                const int64_t shift = kx - pw;
                                int64_t lo, hi;
                                col_bounds(shift, lo, hi);
                                const auto& rm = rowmap[ky];
                                T wacc = T(0);
                                for (int64_t oy = 0; oy < h; ++oy) {
                                    const int64_t iy = rm[oy];
                                    if (iy < 0) continue;
                                    const T* grow = go + oy * w;
                                    const T* irow = pi + iy * w;
                                    T* girow = gi ? gi + iy * w : nullptr;
                                    if (mode != Pad::Zeros)
                                        for (int64_t ox = 0; ox < lo; ++ox) {
                                            const int64_t ix = detail::map_index(ox + shift, w, mode);
                                            wacc += grow[ox] * irow[ix];
                                            if (girow) girow[ix] += grow[ox] * wv;
                                        }
                                    if (girow) {
                                        for (int64_t ox = lo; ox < hi; ++ox) {
                                            wacc += grow[ox] * irow[ox + shift];
                                            girow[ox + shift] += grow[ox] * wv;
                                        }
                                    } else {
                                        for (int64_t ox = lo; ox < hi; ++ox)
                                            wacc += grow[ox] * irow[ox + shift];
                                    }
                                    if (mode != Pad::Zeros)
                                        for (int64_t ox = hi; ox < w; ++ox) {
                                            const int64_t ix = detail::map_index(ox + shift, w, mode);
                                            wacc += grow[ox] * irow[ix];
                                            if (girow) girow[ix] += grow[ox] * wv;
                                        }
                                }
                                if (gw) gw[ky * kw + kx] += wacc;
                            }
                    }
                }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Top-k masking
// ---------------------------------------------------------------------------

/// Test hook: freezes the selected top-k sets across repeated forward passes
/// so finite differencing perturbs values without changing the ranking.
struct TopkFreeze {
    enum class State { Off, Capture, Replay } state = State::Off;
    std::vector<std::vector<uint8_t>> masks;
    size_t cursor = 0;

    static TopkFreeze& get() {
        thread_local TopkFreeze ctx;
        return ctx;
    }
    void start_capture() {
        state = State::Capture;
        masks.clear();
        cursor = 0;
    }
    void start_replay() {
        state = State::Replay;
        cursor = 0;
    }
    void rewind() { cursor = 0; }
    void stop() {
        state = State::Off;
        masks.clear();
        cursor = 0;
    }
};

/// Per row of the trailing axis, keeps the k largest entries verbatim and
/// replaces the rest with -inf so they vanish after softmax. Value ties break
/// toward the lower column index. Gradient is straight-through on the kept
/// set.
template <class T>
TensorT<T> topk_mask(const TensorT<T>& x, int64_t k) {
    SGSF_CHECK(x.rank() >= 1, "topk_mask expects rank >= 1");
    const int64_t n = x.dim(x.rank() - 1);
    SGSF_CHECK(k >= 1 && k <= n,
               "topk_mask: k=" << k << " outside [1," << n << "]");
    const int64_t rows = x.numel() / n;
    constexpr T ninf = -std::numeric_limits<T>::infinity();

    auto kept = std::make_shared<std::vector<uint8_t>>(x.numel(), 0);
    auto& freeze = TopkFreeze::get();
    if (freeze.state == TopkFreeze::State::Replay) {
        SGSF_CHECK(freeze.cursor < freeze.masks.size(),
                   "topk freeze replay underrun");
        const auto& m = freeze.masks[freeze.cursor++];
        SGSF_CHECK(m.size() == kept->size(), "topk freeze mask size mismatch");
        *kept = m;
    } else {
        std::vector<int64_t> idx(n);
        for (int64_t r = 0; r < rows; ++r) {
            const T* p = x.ptr() + r * n;
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(),
                             [p](int64_t a, int64_t b) { return p[a] > p[b]; });
            for (int64_t j = 0; j < k; ++j) (*kept)[r * n + idx[j]] = 1;
        }
        if (freeze.state == TopkFreeze::State::Capture) freeze.masks.push_back(*kept);
    }

    TensorT<T> y = TensorT<T>::zeros(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i)
        y.ptr()[i] = (*kept)[i] ? x.ptr()[i] : ninf;

    detail::attach_tape<T>(y, {x}, [xn = x.node(), yn = y.node().get(), kept]() {
        if (!xn->requires_grad) return;
        xn->ensure_grad();
        for (size_t i = 0; i < yn->grad.size(); ++i)
            if ((*kept)[i]) xn->grad[i] += yn->grad[i];
    });
    return y;
}

// ---------------------------------------------------------------------------
// No-grad utilities (inference-side padding and clamping)
// ---------------------------------------------------------------------------

template <class T>
TensorT<T> clamp01_detached(const TensorT<T>& x) {
    TensorT<T> y = x.clone_detached();
    for (auto& v : y.data()) v = std::min(T(1), std::max(T(0), v));
    return y;
}

/// Reflect-pads [N,C,H,W] on the bottom/right to the requested extents.
template <class T>
TensorT<T> pad_reflect_to(const TensorT<T>& x, int64_t ht, int64_t wt) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(ht >= h && wt >= w, "pad_reflect_to: target smaller than input");
    SGSF_CHECK(ht < 2 * h && wt < 2 * w,
               "pad_reflect_to: padding exceeds input extent");
    TensorT<T> y = TensorT<T>::zeros({n, c, ht, wt});
    for (int64_t bc = 0; bc < n * c; ++bc)
        for (int64_t oy = 0; oy < ht; ++oy) {
            const int64_t iy = oy < h ? oy : 2 * h - 2 - oy;
            const T* src = x.ptr() + (bc * h + iy) * w;
            T* dst = y.ptr() + (bc * ht + oy) * wt;
            for (int64_t ox = 0; ox < wt; ++ox)
                dst[ox] = src[ox < w ? ox : 2 * w - 2 - ox];
        }
    return y;
}

template <class T>
TensorT<T> crop_to(const TensorT<T>& x, int64_t ht, int64_t wt) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    SGSF_CHECK(ht <= h && wt <= w, "crop_to: target larger than input");
    TensorT<T> y = TensorT<T>::zeros({n, c, ht, wt});
    for (int64_t bc = 0; bc < n * c; ++bc)
        for (int64_t oy = 0; oy < ht; ++oy)
            std::copy(x.ptr() + (bc * h + oy) * w, x.ptr() + (bc * h + oy) * w + wt,
                      y.ptr() + (bc * ht + oy) * wt);
    return y;
}

}  // namespace sgsf
