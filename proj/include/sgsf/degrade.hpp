#pragma once

#include "sgsf/ops.hpp"

namespace sgsf {

/// Normalized blur kernel, one shared plane or one per color channel.
/// Entries are nonnegative and each channel sums to 1.
struct Psf {
    int64_t size = 0;                        // odd
    std::vector<std::vector<float>> kernels;  // 1 or 3 planes of size*size

    int64_t channels() const { return static_cast<int64_t>(kernels.size()); }

    const std::vector<float>& kernel_for(int64_t channel) const {
        return kernels.size() == 1 ? kernels[0] : kernels[channel];
    }

    void validate() const {
        SGSF_CHECK(size >= 1 && size % 2 == 1, "psf size must be odd, got " << size);
        SGSF_CHECK(kernels.size() == 1 || kernels.size() == 3,
                   "psf must have 1 or 3 channels");
        for (const auto& k : kernels) {
            SGSF_CHECK(static_cast<int64_t>(k.size()) == size * size,
                       "psf kernel length mismatch");
            double sum = 0.0;
            for (float v : k) {
                SGSF_CHECK(v >= 0.f, "psf entries must be nonnegative");
                sum += v;
            }
            SGSF_CHECK(std::abs(sum - 1.0) <= 1e-6, "psf channel sums to " << sum);
        }
    }

    static Psf delta(int64_t size = 3) {
        Psf p;
        p.size = size;
        p.kernels.assign(1, std::vector<float>(size * size, 0.f));
        p.kernels[0][(size / 2) * size + size / 2] = 1.f;
        return p;
    }
};

enum class PsfKind { Gaussian, AiryLike, TwoLobe };

struct PsfParams {
    double sigma = 1.5;          // gaussian / two-lobe lobe width
    double radius = 2.5;         // airy first-zero radius (pixels)
    double offset_x = 2.0;       // two-lobe secondary displacement
    double offset_y = 0.0;
    double secondary_weight = 0.35;
    bool chromatic = false;      // per-channel wavelength-like scaling
};

namespace detail {

inline std::vector<float> normalize_kernel(std::vector<double> k) {
    double sum = 0.0;
    for (double v : k) sum += v;
    SGSF_CHECK(sum > 0.0, "psf kernel sums to zero");
    std::vector<float> out(k.size());
    for (size_t i = 0; i < k.size(); ++i)
        out[i] = static_cast<float>(k[i] / sum);
    return out;
}

inline std::vector<float> synth_one(PsfKind kind, int64_t size, const PsfParams& p,
                                    double scale) {
    const int64_t r = size / 2;
    std::vector<double> k(size * size, 0.0);
    for (int64_t y = 0; y < size; ++y)
        for (int64_t x = 0; x < size; ++x) {
            const double dy = static_cast<double>(y - r);
            const double dx = static_cast<double>(x - r);
            const double rad = std::sqrt(dx * dx + dy * dy);
            double v = 0.0;
            switch (kind) {
                case PsfKind::Gaussian: {
                    const double s = p.sigma * scale;
                    v = s <= 0.0 ? (rad == 0.0 ? 1.0 : 0.0)
                                 : std::exp(-rad * rad / (2.0 * s * s));
                    break;
                }
                case PsfKind::AiryLike: {
                    // (2 J1(u)/u)^2 with the first zero at p.radius pixels.
                    const double r0 = std::max(p.radius * scale, 1e-6);
                    const double u = 3.8317059702075125 * rad / r0;
                    v = u < 1e-9 ? 1.0
                                 : std::pow(2.0 * std::cyl_bessel_j(1, u) / u, 2.0);
                    break;
                }
                case PsfKind::TwoLobe: {
                    const double s = std::max(p.sigma * scale, 1e-6);
                    const double ox = dx - p.offset_x * scale;
                    const double oy = dy - p.offset_y * scale;
                    v = std::exp(-(dx * dx + dy * dy) / (2.0 * s * s)) +
                        p.secondary_weight *
                            std::exp(-(ox * ox + oy * oy) / (2.0 * s * s));
                    break;
                }
            }
            k[y * size + x] = v;
        }
    return normalize_kernel(std::move(k));
}

}  // namespace detail

/// Synthesizes a normalized PSF. Chromatic mode emits three planes with the
/// blur extent scaled per channel as a stand-in for wavelength dependence.
inline Psf synth_psf(PsfKind kind, int64_t size, const PsfParams& params = {}) {
    SGSF_CHECK(size >= 3 && size % 2 == 1, "psf size must be odd and >= 3, got " << size);
    Psf psf;
    psf.size = size;
    if (params.chromatic) {
        const double scales[3] = {1.08, 1.0, 0.92};  // r, g, b
        for (double s : scales)
            psf.kernels.push_back(detail::synth_one(kind, size, params, s));
    } else {
        psf.kernels.push_back(detail::synth_one(kind, size, params, 1.0));
    }
    psf.validate();
    return psf;
}

enum class DegradeModel { Simple, Hdr };

struct DegradeParams {
    float gamma = 0.8f;            // intensity scaling factor, (0,1]
    float noise_sigma_read = 0.01f;
    float noise_sigma_shot = 0.02f;
    DegradeModel model = DegradeModel::Simple;
    float tone_c = 4.0f;   // tone-map constant; equal to clip_max maps the
                           // clip ceiling to exactly 1
    float clip_max = 4.0f;
    uint64_t seed = 0;

    void validate() const {
        SGSF_CHECK(gamma > 0.f && gamma <= 1.f, "gamma must be in (0,1]");
        SGSF_CHECK(noise_sigma_read >= 0.f && noise_sigma_shot >= 0.f,
                   "noise sigmas must be >= 0");
        SGSF_CHECK(tone_c > 0.f, "tone_c must be > 0");
        SGSF_CHECK(clip_max > 0.f, "clip_max must be > 0");
    }
};

namespace detail {

/// Circular depth-wise blur of [3,H,W] with the PSF.
inline Tensor psf_blur(const Tensor& img, const Psf& psf) {
    NoGradGuard ng;
    const int64_t h = img.dim(1), w = img.dim(2);
    Tensor input = reshape(img, {1, 3, h, w});
    Tensor weight = Tensor::zeros({3, 1, psf.size, psf.size});
    for (int64_t c = 0; c < 3; ++c) {
        const auto& k = psf.kernel_for(c);
        std::copy(k.begin(), k.end(), weight.ptr() + c * psf.size * psf.size);
    }
    Tensor out = conv2d(input, weight, Tensor{}, Pad::Circular, /*groups=*/3);
    return reshape(out, {3, h, w});
}

/// Heteroscedastic noise in fixed pixel order: sigma^2 = read^2 + shot^2 * signal.
inline void add_noise(Tensor& img, float sigma_read, float sigma_shot, uint64_t seed) {
    if (sigma_read == 0.f && sigma_shot == 0.f) return;
    Rng rng(Rng::mix(seed, 0x6e6f697365ull));
    for (int64_t i = 0; i < img.numel(); ++i) {
        const float base = std::max(0.f, img.ptr()[i]);
        const float var = sigma_read * sigma_read + sigma_shot * sigma_shot * base;
        img.ptr()[i] += std::sqrt(var) * static_cast<float>(rng.normal());
    }
}

}  // namespace detail

/// Y = clip((gamma X) (x) k + n, 0, 1) with circular convolution; the delta
/// PSF with gamma=1 and zero noise is the exact identity.
inline Tensor degrade_simple(const Tensor& clean, const Psf& psf, const DegradeParams& p) {
    SGSF_CHECK(clean.rank() == 3 && clean.dim(0) == 3,
               "degrade_simple expects [3,H,W], got " << shape_str(clean.shape()));
    p.validate();
    psf.validate();
    Tensor scaled = clean.clone_detached();
    if (p.gamma != 1.f)
        for (auto& v : scaled.data()) v *= p.gamma;
    Tensor out = detail::psf_blur(scaled, psf);
    detail::add_noise(out, p.noise_sigma_read, p.noise_sigma_shot, p.seed);
    for (auto& v : out.data()) v = std::min(1.f, std::max(0.f, v));
    return out;
}

/// HDR pipeline: Y = tone(clip(X * k + n, 0, clip_max)) with the extended
/// Reinhard map tone(x) = x (1 + x / tone_c^2) / (1 + x), clamped to [0,1].
inline Tensor degrade_hdr(const Tensor& clean_hdr, const Psf& psf, const DegradeParams& p) {
    SGSF_CHECK(clean_hdr.rank() == 3 && clean_hdr.dim(0) == 3,
               "degrade_hdr expects [3,H,W], got " << shape_str(clean_hdr.shape()));
    p.validate();
    psf.validate();
    Tensor out = detail::psf_blur(clean_hdr, psf);
    detail::add_noise(out, p.noise_sigma_read, p.noise_sigma_shot, p.seed);
    const float c2 = p.tone_c * p.tone_c;
    for (auto& v : out.data()) {
        v = std::min(p.clip_max, std::max(0.f, v));
        v = v * (1.f + v / c2) / (1.f + v);
        v = std::min(1.f, std::max(0.f, v));
    }
    return out;
}

/// Tone map applied alone (the ground-truth side of the HDR model).
inline Tensor tone_map(const Tensor& hdr, const DegradeParams& p) {
    Tensor out = hdr.clone_detached();
    const float c2 = p.tone_c * p.tone_c;
    for (auto& v : out.data()) {
        v = std::min(p.clip_max, std::max(0.f, v));
        v = v * (1.f + v / c2) / (1.f + v);
        v = std::min(1.f, std::max(0.f, v));
    }
    return out;
}

}  // namespace sgsf
