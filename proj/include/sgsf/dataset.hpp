#pragma once

#include <filesystem>
#include <thread>

#include "sgsf/checkpoint.hpp"
#include "sgsf/config.hpp"
#include "sgsf/image_io.hpp"
#include "sgsf/segmentation.hpp"

namespace sgsf {

/// One paired training record: degraded input, clean target, instance masks.
struct DatasetSample {
    Tensor degraded;  // [3,H,W] in [0,1]
    Tensor clean;     // [3,H,W] in [0,1]
    MaskSet masks;
};

// ---------------------------------------------------------------------------
// Procedural scenes
// ---------------------------------------------------------------------------

namespace detail {

struct ShapeLabelMap {
    std::vector<int32_t> label;  // 0 = background, i+1 = shape i
    int32_t nshapes = 0;
};

inline void paint_disc(Tensor& img, std::vector<int32_t>& label, int32_t id,
                       double cy, double cx, double radius, const float rgb[3]) {
    const int64_t h = img.dim(1), w = img.dim(2), npx = h * w;
    const int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(cy - radius - 1));
    const int64_t y1 = std::min(h - 1, static_cast<int64_t>(cy + radius + 1));
    const int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(cx - radius - 1));
    const int64_t x1 = std::min(w - 1, static_cast<int64_t>(cx + radius + 1));
    for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x) {
            const double dy = y - cy, dx = x - cx;
            if (dy * dy + dx * dx > radius * radius) continue;
            for (int64_t c = 0; c < 3; ++c) img.ptr()[c * npx + y * w + x] = rgb[c];
            label[y * w + x] = id;
        }
}

}  // namespace detail

/// Seeded composition of a gradient background, filled shapes, and thin
/// stroke marks, plus the exact instance masks of what was drawn. Every
/// sample is a pure function of (seed, index).
inline std::pair<Tensor, MaskSet> procedural_scene(uint64_t seed, int64_t index,
                                                   int64_t size) {
    Rng rng(Rng::mix(seed, static_cast<uint64_t>(index)));
    const int64_t h = size, w = size, npx = h * w;
    Tensor img = Tensor::zeros({3, h, w});
    std::vector<int32_t> label(npx, 0);

    // Gradient background between two random colors along a random direction.
    float c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = static_cast<float>(rng.uniform(0.05, 0.95));
        c1[c] = static_cast<float>(rng.uniform(0.05, 0.95));
    }
    const double theta = rng.uniform(0.0, 2.0 * 3.14159265358979);
    const double gx = std::cos(theta), gy = std::sin(theta);
    const double span = std::abs(gx) * (w - 1) + std::abs(gy) * (h - 1);
    const double base = std::min(0.0, gx * (w - 1)) + std::min(0.0, gy * (h - 1));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const double t = span > 0 ? (gx * x + gy * y - base) / span : 0.0;
            for (int64_t c = 0; c < 3; ++c)
                img.ptr()[c * npx + y * w + x] =
                    c0[c] + static_cast<float>(t) * (c1[c] - c0[c]);
        }

    const int64_t nshapes = 3 + rng.uniform_int(4);
    int32_t next_id = 1;
    for (int64_t s = 0; s < nshapes; ++s) {
        float rgb[3];
        for (int c = 0; c < 3; ++c) rgb[c] = static_cast<float>(rng.uniform(0.05, 0.95));
        const int64_t kind = rng.uniform_int(3);
        const int32_t id = next_id++;
        if (kind == 0) {
            // Filled rectangle.
            const int64_t rh = h / 8 + rng.uniform_int(h / 3);
            const int64_t rw = w / 8 + rng.uniform_int(w / 3);
            const int64_t y0 = rng.uniform_int(h - rh);
            const int64_t x0 = rng.uniform_int(w - rw);
            for (int64_t y = y0; y < y0 + rh; ++y)
                for (int64_t x = x0; x < x0 + rw; ++x) {
                    for (int64_t c = 0; c < 3; ++c) img.ptr()[c * npx + y * w + x] = rgb[c];
                    label[y * w + x] = id;
                }
        } else if (kind == 1) {
            // Filled circle.
            const double radius = size / 10.0 + rng.uniform(0.0, size / 5.0);
            const double cy = rng.uniform(radius, h - radius);
            const double cx = rng.uniform(radius, w - radius);
            detail::paint_disc(img, label, id, cy, cx, radius, rgb);
        } else {
            // Text-like stroke: a short polyline stamped with a thin pen.
            double py = rng.uniform(4.0, h - 4.0);
            double px = rng.uniform(4.0, w - 4.0);
            const double pen = 0.8 + rng.uniform(0.0, 0.8);
            const int64_t segs = 2 + rng.uniform_int(3);
            for (int64_t sg = 0; sg < segs; ++sg) {
                const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979);
                const double len = size / 16.0 + rng.uniform(0.0, size / 5.0);
                const double dy = std::sin(ang), dx = std::cos(ang);
                const int64_t steps = static_cast<int64_t>(len * 2) + 1;
                for (int64_t st = 0; st <= steps; ++st) {
                    const double ty = py + dy * len * st / steps;
                    const double tx = px + dx * len * st / steps;
                    if (ty < 1 || ty > h - 2 || tx < 1 || tx > w - 2) break;
                    detail::paint_disc(img, label, id, ty, tx, pen, rgb);
                }
                py = std::min(static_cast<double>(h - 4), std::max(4.0, py + dy * len));
                px = std::min(static_cast<double>(w - 4), std::max(4.0, px + dx * len));
            }
        }
    }

    for (auto& v : img.data()) v = std::min(1.f, std::max(0.f, v));

    // Instance masks from the ownership labels (shapes can be fully painted
    // over; only labels still present become masks).
    MaskSet ms;
    ms.height = h;
    ms.width = w;
    ms.source = MaskSet::Source::Naive;
    std::map<int32_t, size_t> order;
    for (int64_t i = 0; i < npx; ++i) {
        auto it = order.find(label[i]);
        if (it == order.end()) {
            it = order.emplace(label[i], ms.masks.size()).first;
            ms.masks.emplace_back(npx, 0);
        }
        ms.masks[it->second][i] = 1;
    }
    return {img, ms};
}

/// Highlight expansion used by the HDR degradation model: dark pixels stay
/// near p, bright pixels grow toward clip_max.
inline Tensor expand_hdr(const Tensor& img, float clip_max) {
    Tensor out = img.clone_detached();
    for (auto& v : out.data()) {
        const float p = std::min(1.f, std::max(0.f, v));
        v = p * (1.f + (clip_max - 1.f) * p * p * p * p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sample + manifest I/O
// ---------------------------------------------------------------------------

inline void save_sample(const DatasetSample& s, const std::string& path) {
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.emplace_back("degraded", s.degraded);
    tensors.emplace_back("clean", s.clean);
    for (size_t i = 0; i < s.masks.masks.size(); ++i) {
        Tensor m = Tensor::zeros({s.masks.height, s.masks.width});
        for (size_t j = 0; j < s.masks.masks[i].size(); ++j)
            m.ptr()[j] = static_cast<float>(s.masks.masks[i][j]);
        tensors.emplace_back("mask_" + std::to_string(i), m);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        SGSF_CHECK(os.good(), "cannot open '" << tmp << "' for writing");
        detail::write_tensor_section(os, tensors);
        SGSF_CHECK(os.good(), "write to '" << tmp << "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline DatasetSample load_sample(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    SGSF_CHECK(is.good(), "cannot open sample '" << path << "'");
    auto tensors = detail::read_tensor_section(is);
    DatasetSample s;
    for (auto& [name, t] : tensors) {
        if (name == "degraded") {
            s.degraded = t;
        } else if (name == "clean") {
            s.clean = t;
        } else {
            SGSF_CHECK(name.rfind("mask_", 0) == 0,
                       "sample '" << path << "': unexpected tensor '" << name << "'");
            SGSF_CHECK(t.rank() == 2, "sample mask must be rank 2");
            s.masks.height = t.dim(0);
            s.masks.width = t.dim(1);
            std::vector<uint8_t> m(t.numel());
            for (int64_t i = 0; i < t.numel(); ++i) m[i] = t.ptr()[i] > 0.5f ? 1 : 0;
            s.masks.masks.push_back(std::move(m));
        }
    }
    SGSF_CHECK(s.degraded.defined() && s.clean.defined(),
               "sample '" << path << "' missing degraded/clean tensors");
    SGSF_CHECK(s.degraded.shape() == s.clean.shape(),
               "sample '" << path << "': degraded/clean shape mismatch");
    return s;
}

enum class DatasetSource { Procedural, ImageDir };

/// Builds one sample deterministically from (seed, index). The image-dir
/// source ingests 8-bit RGB PNGs and crops seeded patches; masks then come
/// from the naive segmenter on the clean patch.
inline DatasetSample make_sample(DatasetSource source, const DegradeSpec& spec,
                                 uint64_t seed, int64_t index, int64_t patch,
                                 const std::vector<std::string>& image_paths = {}) {
    const Psf psf = make_psf(spec.psf);
    DegradeParams p = spec.params;
    p.seed = Rng::mix(seed, static_cast<uint64_t>(index) * 2 + 1);

    Tensor clean;
    MaskSet masks;
    if (source == DatasetSource::Procedural) {
        auto [img, ms] = procedural_scene(seed, index, patch);
        clean = img;
        masks = std::move(ms);
    } else {
        SGSF_CHECK(!image_paths.empty(), "image-dir source has no readable images");
        Rng rng(Rng::mix(seed, static_cast<uint64_t>(index)));
        const Tensor full = load_png_rgb(image_paths[index % image_paths.size()]);
        const int64_t h = full.dim(1), w = full.dim(2);
        SGSF_CHECK(h >= patch && w >= patch,
                   "image smaller than patch: " << h << "x" << w << " < " << patch);
        const int64_t y0 = h == patch ? 0 : rng.uniform_int(h - patch + 1);
        const int64_t x0 = w == patch ? 0 : rng.uniform_int(w - patch + 1);
        clean = Tensor::zeros({3, patch, patch});
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t y = 0; y < patch; ++y)
                for (int64_t x = 0; x < patch; ++x)
                    clean.ptr()[(c * patch + y) * patch + x] =
                        full.ptr()[(c * h + y0 + y) * w + x0 + x];
        masks = naive_segment(clean);
    }

    DatasetSample s;
    s.masks = std::move(masks);
    if (spec.params.model == DegradeModel::Simple) {
        s.clean = clean;
        s.degraded = degrade_simple(clean, psf, p);
    } else {
        const Tensor hdr = expand_hdr(clean, p.clip_max);
        s.clean = tone_map(hdr, p);
        s.degraded = degrade_hdr(hdr, psf, p);
    }
    return s;
}

inline std::vector<std::string> list_pngs(const std::string& dir) {
    std::vector<std::string> paths;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.path().extension() == ".png") paths.push_back(entry.path().string());
    }
    SGSF_CHECK(!ec, "unreadable image directory '" << dir << "'");
    std::sort(paths.begin(), paths.end());
    return paths;
}

/// Writes `count` samples plus manifest.json. Sample generation may run on
/// several threads; each sample depends only on (seed, index), so the output
/// is identical regardless of thread count.
inline void gen_dataset(DatasetSource source, const DegradeSpec& spec, uint64_t seed,
                        int64_t count, int64_t patch, const std::string& out_dir,
                        const std::string& image_dir = "", int threads = 1) {
    SGSF_CHECK(patch % 16 == 0, "patch " << patch << " must be a multiple of 16");
    SGSF_CHECK(count >= 1, "count must be >= 1");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> image_paths;
    if (source == DatasetSource::ImageDir) {
        image_paths = list_pngs(image_dir);
        SGSF_CHECK(!image_paths.empty(), "unreadable image directory or no PNGs in '"
                                             << image_dir << "'");
    }

    std::vector<json> entries(count);
    auto worker = [&](int64_t begin, int64_t stride) {
        for (int64_t i = begin; i < count; i += stride) {
            char name[32];
            std::snprintf(name, sizeof(name), "sample_%06lld",
                          static_cast<long long>(i));
            DatasetSample s = make_sample(source, spec, seed, i, patch, image_paths);
            save_sample(s, out_dir + "/" + name + ".bin");
            entries[i] = json{{"id", name},
                              {"file", std::string(name) + ".bin"},
                              {"height", s.clean.dim(1)},
                              {"width", s.clean.dim(2)},
                              {"masks", s.masks.masks.size()}};
        }
    };
    if (threads <= 1) {
        worker(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker, t, threads);
        for (auto& t : pool) t.join();
    }

    json manifest{{"version", 1},
                  {"source", source == DatasetSource::Procedural ? "procedural" : "image-dir"},
                  {"count", count},
                  {"patch", patch},
                  {"seed", seed},
                  {"degrade", degrade_spec_to_json(spec)},
                  {"samples", entries}};
    const std::string tmp = out_dir + "/manifest.json.tmp";
    {
        std::ofstream f(tmp);
        SGSF_CHECK(f.good(), "cannot write manifest in '" << out_dir << "'");
        f << manifest.dump(2) << "\n";
    }
    std::filesystem::rename(tmp, out_dir + "/manifest.json");
}

struct LoadedDataset {
    std::vector<DatasetSample> samples;
    json manifest;
};

inline LoadedDataset load_dataset(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json");
    SGSF_CHECK(f.good(), "cannot open '" << dir << "/manifest.json'");
    LoadedDataset ds;
    f >> ds.manifest;
    for (const auto& entry : ds.manifest.at("samples"))
        ds.samples.push_back(load_sample(dir + "/" + entry.at("file").get<std::string>()));
    SGSF_CHECK(!ds.samples.empty(), "dataset '" << dir << "' is empty");
    return ds;
}

}  // namespace sgsf
