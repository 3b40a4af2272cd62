#pragma once

#include "sgsf/dataset.hpp"

namespace sgsf {

/// Horizontal flip followed by rot90 quarter turns (clockwise), as one
/// sampled op applied identically to degraded, clean and masks.
struct AugmentOp {
    bool hflip = false;
    int rot90 = 0;  // 0..3 clockwise quarter turns
};

inline AugmentOp sample_augment(Rng& rng) {
    AugmentOp op;
    op.hflip = rng.uniform() < 0.5;
    op.rot90 = static_cast<int>(rng.uniform_int(4));
    return op;
}

namespace detail {

template <class T>
std::vector<T> hflip_plane(const std::vector<T>& in, int64_t h, int64_t w) {
    std::vector<T> out(in.size());
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) out[y * w + x] = in[y * w + (w - 1 - x)];
    return out;
}

/// One clockwise quarter turn: out[y][x] = in[h-1-x][y], out is w x h.
template <class T>
std::vector<T> rot90_plane(const std::vector<T>& in, int64_t h, int64_t w) {
    std::vector<T> out(in.size());
    for (int64_t y = 0; y < w; ++y)
        for (int64_t x = 0; x < h; ++x) out[y * h + x] = in[(h - 1 - x) * w + y];
    return out;
}

}  // namespace detail

inline Tensor apply_augment(const Tensor& img, const AugmentOp& op) {
    SGSF_CHECK(img.rank() == 3, "apply_augment expects [C,H,W]");
    const int64_t c = img.dim(0);
    int64_t h = img.dim(1), w = img.dim(2);
    if (op.rot90 % 2 == 1)
        SGSF_CHECK(h == w, "90-degree rotation requires square images, got "
                               << h << "x" << w);
    Tensor out = Tensor::zeros(img.shape());
    for (int64_t ci = 0; ci < c; ++ci) {
        std::vector<float> plane(img.ptr() + ci * h * w, img.ptr() + (ci + 1) * h * w);
        if (op.hflip) plane = detail::hflip_plane(plane, h, w);
        int64_t ph = h, pw = w;
        for (int r = 0; r < op.rot90; ++r) {
            plane = detail::rot90_plane(plane, ph, pw);
            std::swap(ph, pw);
        }
        std::copy(plane.begin(), plane.end(), out.ptr() + ci * h * w);
    }
    return out;
}

inline MaskSet apply_augment(const MaskSet& ms, const AugmentOp& op) {
    MaskSet out = ms;
    for (auto& m : out.masks) {
        if (op.hflip) m = detail::hflip_plane(m, ms.height, ms.width);
        int64_t ph = ms.height, pw = ms.width;
        for (int r = 0; r < op.rot90; ++r) {
            m = detail::rot90_plane(m, ph, pw);
            std::swap(ph, pw);
        }
    }
    if (op.rot90 % 2 == 1) std::swap(out.height, out.width);
    return out;
}

inline DatasetSample augment(const DatasetSample& s, uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x617567ull));
    const AugmentOp op = sample_augment(rng);
    DatasetSample out;
    out.degraded = apply_augment(s.degraded, op);
    out.clean = apply_augment(s.clean, op);
    out.masks = apply_augment(s.masks, op);
    return out;
}

/// Crops the (degraded, clean, masks) triple to a size x size window.
inline DatasetSample crop_sample(const DatasetSample& s, int64_t y0, int64_t x0,
                                 int64_t size) {
    const int64_t h = s.clean.dim(1), w = s.clean.dim(2);
    SGSF_CHECK(y0 >= 0 && x0 >= 0 && y0 + size <= h && x0 + size <= w,
               "crop window out of bounds");
    DatasetSample out;
    auto crop_img = [&](const Tensor& img) {
        Tensor t = Tensor::zeros({3, size, size});
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < size; ++y)
                std::copy(img.ptr() + (c * h + y0 + y) * w + x0,
                          img.ptr() + (c * h + y0 + y) * w + x0 + size,
                          t.ptr() + (c * size + y) * size);
        return t;
    };
    out.degraded = crop_img(s.degraded);
    out.clean = crop_img(s.clean);
    out.masks.height = size;
    out.masks.width = size;
    out.masks.source = s.masks.source;
    for (const auto& m : s.masks.masks) {
        std::vector<uint8_t> cm(size * size);
        for (int64_t y = 0; y < size; ++y)
            std::copy(m.begin() + (y0 + y) * w + x0, m.begin() + (y0 + y) * w + x0 + size,
                      cm.begin() + y * size);
        out.masks.masks.push_back(std::move(cm));
    }
    return out;
}

}  // namespace sgsf
