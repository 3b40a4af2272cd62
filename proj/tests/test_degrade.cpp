#include <gtest/gtest.h>

#include "sgsf/dataset.hpp"
#include "sgsf/degrade.hpp"

using namespace sgsf;

namespace {

Tensor random_image(uint64_t seed, int64_t h = 16, int64_t w = 16) {
    Rng rng(seed);
    return Tensor::rand_uniform({3, h, w}, rng);
}

double mean_of(const Tensor& t) {
    double s = 0;
    for (float v : t.data()) s += v;
    return s / t.numel();
}

}  // namespace

TEST(Psf, GaussianSigmaZeroIsDelta) {
    PsfParams p;
    p.sigma = 0.0;
    Psf psf = synth_psf(PsfKind::Gaussian, 3, p);
    EXPECT_FLOAT_EQ(psf.kernels[0][4], 1.f);
    double sum = 0;
    for (float v : psf.kernels[0]) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-6);
}

TEST(Psf, AllKindsNormalized) {
    for (PsfKind kind : {PsfKind::Gaussian, PsfKind::AiryLike, PsfKind::TwoLobe}) {
        Psf psf = synth_psf(kind, 9, {});
        for (const auto& k : psf.kernels) {
            double sum = 0;
            for (float v : k) {
                EXPECT_GE(v, 0.f);
                sum += v;
            }
            EXPECT_NEAR(sum, 1.0, 1e-6);
        }
    }
}

TEST(Psf, GaussianCenterMatchesGridOracle) {
    // size 5 sigma 1: center = 1 / sum over grid of exp(-r^2/2)
    PsfParams p;
    p.sigma = 1.0;
    Psf psf = synth_psf(PsfKind::Gaussian, 5, p);
    double sum = 0;
    for (int y = -2; y <= 2; ++y)
        for (int x = -2; x <= 2; ++x) sum += std::exp(-(x * x + y * y) / 2.0);
    EXPECT_NEAR(psf.kernels[0][2 * 5 + 2], 1.0 / sum, 1e-6);
}

TEST(Psf, OffCenterEnergyForFlareKinds) {
    for (PsfKind kind : {PsfKind::AiryLike, PsfKind::TwoLobe}) {
        Psf psf = synth_psf(kind, 9, {});
        const auto& k = psf.kernels[0];
        double off = 0;
        for (int64_t i = 0; i < 81; ++i)
            if (i != 40) off += k[i];
        EXPECT_GT(off, 0.05) << "kind " << int(kind);
    }
}

TEST(Psf, EvenSizeThrows) {
    EXPECT_THROW(synth_psf(PsfKind::Gaussian, 4, {}), std::runtime_error);
}

TEST(Psf, ChromaticHasThreeNormalizedChannels) {
    PsfParams p;
    p.chromatic = true;
    Psf psf = synth_psf(PsfKind::AiryLike, 7, p);
    EXPECT_EQ(psf.channels(), 3);
    psf.validate();
}

TEST(DegradeSimple, IdentityConfiguration) {
    Tensor x = random_image(1);
    DegradeParams p;
    p.gamma = 1.f;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    Tensor y = degrade_simple(x, Psf::delta(), p);
    EXPECT_EQ(y.data(), x.data());
}

TEST(DegradeSimple, GammaScalesExactly) {
    Tensor x = random_image(2);
    DegradeParams p;
    p.gamma = 0.5f;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    Tensor y = degrade_simple(x, Psf::delta(), p);
    for (int64_t i = 0; i < x.numel(); ++i)
        EXPECT_FLOAT_EQ(y.ptr()[i], 0.5f * x.ptr()[i]);
}

TEST(DegradeSimple, MeanConservation) {
    // Circular convolution with a normalized PSF conserves the mean.
    Rng rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = random_image(100 + trial);
        PsfParams pp;
        pp.sigma = rng.uniform(0.5, 2.0);
        Psf psf = synth_psf(PsfKind::Gaussian, 7, pp);
        DegradeParams p;
        p.gamma = static_cast<float>(rng.uniform(0.3, 1.0));
        p.noise_sigma_read = 0.f;
        p.noise_sigma_shot = 0.f;
        Tensor y = degrade_simple(x, psf, p);
        EXPECT_NEAR(mean_of(y), p.gamma * mean_of(x), 1e-5);
    }
}

TEST(DegradeSimple, NoiseSeedReproducibleAndZeroMean) {
    Tensor x = Tensor::filled({3, 32, 32}, 0.5f);
    DegradeParams p;
    p.gamma = 1.f;
    p.noise_sigma_read = 0.05f;
    p.noise_sigma_shot = 0.f;
    p.seed = 42;
    Tensor y1 = degrade_simple(x, Psf::delta(), p);
    Tensor y2 = degrade_simple(x, Psf::delta(), p);
    EXPECT_EQ(y1.data(), y2.data());

    p.seed = 43;
    Tensor y3 = degrade_simple(x, Psf::delta(), p);
    EXPECT_NE(y1.data(), y3.data());

    // Empirical noise mean within 3 sigma / sqrt(n) of zero.
    double acc = 0;
    for (int64_t i = 0; i < x.numel(); ++i) acc += y3.ptr()[i] - 0.5f;
    const double noise_mean = acc / x.numel();
    EXPECT_LE(std::abs(noise_mean), 3.0 * 0.05 / std::sqrt((double)x.numel()));
}

TEST(DegradeHdr, ZeroInputMapsToZero) {
    Tensor x = Tensor::zeros({3, 8, 8});
    DegradeParams p;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    Tensor y = degrade_hdr(x, Psf::delta(), p);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 0.f);
}

TEST(DegradeHdr, ToneMapFixedPointAtOne) {
    // tone(1) with tone_c = 1: 1*(1+1)/(1+1) = 1.
    Tensor x = Tensor::ones({3, 4, 4});
    DegradeParams p;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    p.tone_c = 1.f;
    Tensor y = degrade_hdr(x, Psf::delta(), p);
    for (float v : y.data()) EXPECT_FLOAT_EQ(v, 1.f);
}

TEST(DegradeHdr, ToneMapClosedForm) {
    // tone(0.5) with tone_c = 2: 0.5*(1+0.125)/1.5 = 0.375.
    Tensor x = Tensor::filled({3, 4, 4}, 0.5f);
    DegradeParams p;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    p.tone_c = 2.f;
    Tensor y = degrade_hdr(x, Psf::delta(), p);
    for (float v : y.data()) EXPECT_NEAR(v, 0.375f, 1e-6);
}

TEST(DegradeHdr, OutputAlwaysInUnitRange) {
    Rng rng(5);
    Tensor x = Tensor::rand_uniform({3, 16, 16}, rng, 0.f, 6.f);
    DegradeParams p;
    p.noise_sigma_read = 0.05f;
    p.noise_sigma_shot = 0.05f;
    p.seed = 9;
    Tensor y = degrade_hdr(x, synth_psf(PsfKind::TwoLobe, 7, {}), p);
    for (float v : y.data()) {
        EXPECT_GE(v, 0.f);
        EXPECT_LE(v, 1.f);
    }
}

TEST(DegradeHdr, MonotoneWithoutNoise) {
    DegradeParams p;
    p.noise_sigma_read = 0.f;
    p.noise_sigma_shot = 0.f;
    float prev = -1.f;
    for (float v : {0.f, 0.2f, 0.9f, 1.5f, 3.f, 4.f, 8.f}) {
        Tensor x = Tensor::filled({3, 2, 2}, v);
        Tensor y = degrade_hdr(x, Psf::delta(), p);
        EXPECT_GE(y.ptr()[0], prev);
        prev = y.ptr()[0];
    }
}

// --- dataset generation ---

TEST(Dataset, ProceduralSceneReproducible) {
    auto [img1, ms1] = procedural_scene(11, 3, 64);
    auto [img2, ms2] = procedural_scene(11, 3, 64);
    EXPECT_EQ(img1.data(), img2.data());
    EXPECT_EQ(ms1.masks, ms2.masks);
    auto [img3, ms3] = procedural_scene(11, 4, 64);
    EXPECT_NE(img1.data(), img3.data());
    // Masks partition the image.
    std::vector<int> cover(64 * 64, 0);
    for (const auto& m : ms1.masks)
        for (size_t i = 0; i < m.size(); ++i) cover[i] += m[i];
    for (int c : cover) EXPECT_EQ(c, 1);
}

TEST(Dataset, GenParallelMatchesSerial) {
    DegradeSpec spec;
    spec.psf.size = 5;
    const std::string d1 = "/tmp/sgsf_ds_serial", d2 = "/tmp/sgsf_ds_par";
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
    gen_dataset(DatasetSource::Procedural, spec, 21, 4, 32, d1, "", 1);
    gen_dataset(DatasetSource::Procedural, spec, 21, 4, 32, d2, "", 2);
    for (int i = 0; i < 4; ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "/sample_%06d.bin", i);
        DatasetSample a = load_sample(d1 + name);
        DatasetSample b = load_sample(d2 + name);
        EXPECT_EQ(a.degraded.data(), b.degraded.data());
        EXPECT_EQ(a.clean.data(), b.clean.data());
        EXPECT_EQ(a.masks.masks, b.masks.masks);
    }
}

TEST(Dataset, ManifestAndRoundtrip) {
    DegradeSpec spec;
    spec.psf.size = 5;
    const std::string dir = "/tmp/sgsf_ds_manifest";
    std::filesystem::remove_all(dir);
    gen_dataset(DatasetSource::Procedural, spec, 5, 3, 32, dir);
    LoadedDataset ds = load_dataset(dir);
    EXPECT_EQ(ds.samples.size(), 3u);
    EXPECT_EQ(ds.manifest.at("count").get<int>(), 3);
    EXPECT_EQ(ds.manifest.at("patch").get<int>(), 32);
    EXPECT_TRUE(ds.manifest.contains("degrade"));
    for (const auto& s : ds.samples) {
        EXPECT_EQ(s.degraded.shape(), (Shape{3, 32, 32}));
        EXPECT_EQ(s.clean.shape(), (Shape{3, 32, 32}));
        for (float v : s.degraded.data()) {
            EXPECT_GE(v, 0.f);
            EXPECT_LE(v, 1.f);
        }
    }
}

TEST(Dataset, HdrModelProducesBoundedPairs) {
    DegradeSpec spec;
    spec.params.model = DegradeModel::Hdr;
    spec.psf.size = 5;
    DatasetSample s = make_sample(DatasetSource::Procedural, spec, 3, 0, 32);
    for (float v : s.clean.data()) {
        EXPECT_GE(v, 0.f);
        EXPECT_LE(v, 1.f);
    }
    for (float v : s.degraded.data()) {
        EXPECT_GE(v, 0.f);
        EXPECT_LE(v, 1.f);
    }
}

TEST(Dataset, UnreadableImageDirThrows) {
    DegradeSpec spec;
    EXPECT_THROW(gen_dataset(DatasetSource::ImageDir, spec, 1, 2, 32,
                             "/tmp/sgsf_ds_out_x", "/nonexistent_dir_xyz"),
                 std::runtime_error);
}
