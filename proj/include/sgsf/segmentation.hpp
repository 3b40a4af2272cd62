#pragma once

#include <deque>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sgsf/tensor.hpp"

namespace sgsf {

/// A set of binary instance masks over one H x W image. Masks produced by the
/// built-in segmenter partition the image; externally supplied masks may
/// overlap or leave pixels uncovered.
struct MaskSet {
    enum class Source { File, Naive, External };
    int64_t height = 0;
    int64_t width = 0;
    std::vector<std::vector<uint8_t>> masks;  // row-major, {0,1}
    Source source = Source::Naive;

    size_t count() const { return masks.size(); }
};

/// Connected-component segmentation of the color-quantized image: each
/// channel is quantized to ceil(1/threshold) levels, components are
/// 4-connected regions of equal quantized color, and components smaller than
/// 16 px are merged into the adjacent component sharing the longest boundary.
inline MaskSet naive_segment(const Tensor& img, float threshold = 0.25f,
                             int64_t min_size = 16) {
    SGSF_CHECK(img.rank() == 3 && img.dim(0) == 3,
               "naive_segment expects [3,H,W], got " << shape_str(img.shape()));
    SGSF_CHECK(threshold > 0.f && threshold <= 1.f, "threshold must be in (0,1]");
    const int64_t h = img.dim(1), w = img.dim(2), npx = h * w;
    const int64_t levels = static_cast<int64_t>(std::ceil(1.0 / threshold));

    std::vector<int32_t> quant(npx);
    for (int64_t i = 0; i < npx; ++i) {
        int32_t code = 0;
        for (int64_t c = 0; c < 3; ++c) {
            const float v = img.ptr()[c * npx + i];
            int64_t q = static_cast<int64_t>(v * static_cast<float>(levels));
            q = std::min(levels - 1, std::max<int64_t>(0, q));
            code = static_cast<int32_t>(code * levels + q);
        }
        quant[i] = code;
    }

    // BFS flood fill over equal quantized colors, 4-connectivity.
    std::vector<int32_t> label(npx, -1);
    int32_t ncomp = 0;
    std::deque<int64_t> queue;
    for (int64_t start = 0; start < npx; ++start) {
        if (label[start] >= 0) continue;
        const int32_t id = ncomp++;
        label[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            const int64_t p = queue.front();
            queue.pop_front();
            const int64_t y = p / w, x = p % w;
            const int64_t nbrs[4] = {p - w, p + w, p - 1, p + 1};
            const bool ok[4] = {y > 0, y < h - 1, x > 0, x < w - 1};
            for (int j = 0; j < 4; ++j) {
                if (!ok[j]) continue;
                const int64_t q = nbrs[j];
                if (label[q] < 0 && quant[q] == quant[p]) {
                    label[q] = id;
                    queue.push_back(q);
                }
            }
        }
    }

    // Merge undersized components into the 4-adjacent component with the
    // longest shared boundary (ties: lower component id). Repeats until all
    // components reach min_size or only one remains.
    std::vector<int64_t> size(ncomp, 0);
    for (int64_t i = 0; i < npx; ++i) ++size[label[i]];
    auto find_root = [](std::vector<int32_t>& parent, int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    std::vector<int32_t> parent(ncomp);
    for (int32_t i = 0; i < ncomp; ++i) parent[i] = i;

    bool changed = true;
    while (changed) {
        changed = false;
        // Boundary lengths between current merged components.
        std::map<std::pair<int32_t, int32_t>, int64_t> boundary;
        for (int64_t i = 0; i < npx; ++i) {
            const int64_t y = i / w, x = i % w;
            const int32_t a = find_root(parent, label[i]);
            if (x + 1 < w) {
                const int32_t b = find_root(parent, label[i + 1]);
                if (a != b) ++boundary[{std::min(a, b), std::max(a, b)}];
            }
            if (y + 1 < h) {
                const int32_t b = find_root(parent, label[i + w]);
                if (a != b) ++boundary[{std::min(a, b), std::max(a, b)}];
            }
        }
        std::vector<int64_t> csize(ncomp, 0);
        for (int64_t i = 0; i < npx; ++i) ++csize[find_root(parent, label[i])];

        // Smallest undersized component first; deterministic scan order.
        int32_t victim = -1;
        for (int32_t c = 0; c < ncomp; ++c) {
            if (find_root(parent, c) != c || csize[c] == 0 || csize[c] >= min_size)
                continue;
            if (victim < 0 || csize[c] < csize[victim]) victim = c;
        }
        if (victim < 0) break;

        int32_t best = -1;
        int64_t best_len = -1;
        for (const auto& [key, len] : boundary) {
            int32_t other = -1;
            if (key.first == victim) other = key.second;
            else if (key.second == victim) other = key.first;
            else continue;
            if (len > best_len || (len == best_len && other < best)) {
                best = other;
                best_len = len;
            }
        }
        if (best < 0) break;  // single component left
        parent[victim] = best;
        changed = true;
    }

    // Emit masks ordered by first pixel occurrence.
    std::map<int32_t, size_t> order;
    MaskSet ms;
    ms.height = h;
    ms.width = w;
    ms.source = MaskSet::Source::Naive;
    for (int64_t i = 0; i < npx; ++i) {
        const int32_t r = find_root(parent, label[i]);
        auto it = order.find(r);
        if (it == order.end()) {
            it = order.emplace(r, ms.masks.size()).first;
            ms.masks.emplace_back(npx, 0);
        }
        ms.masks[it->second][i] = 1;
    }
    return ms;
}

/// Eq.-style composition of the colored segmentation map: each mask region is
/// painted with the per-channel mean of the image under it, overlapping masks
/// contribute the mean of their colors, and the painted map is blended with
/// the image by alpha.
inline Tensor compose_seg_map(const Tensor& img, const MaskSet& masks, float alpha) {
    SGSF_CHECK(img.rank() == 3 && img.dim(0) == 3,
               "compose_seg_map expects [3,H,W], got " << shape_str(img.shape()));
    SGSF_CHECK(alpha >= 0.f && alpha <= 1.f, "alpha must be in [0,1]");
    const int64_t h = img.dim(1), w = img.dim(2), npx = h * w;
    for (const auto& m : masks.masks)
        SGSF_CHECK(static_cast<int64_t>(m.size()) == npx,
                   "compose_seg_map: mask size " << m.size() << " vs image "
                                                 << h << "x" << w);

    std::vector<float> color_sum(3 * npx, 0.f);
    std::vector<float> cover(npx, 0.f);
    for (const auto& m : masks.masks) {
        double mean[3] = {0, 0, 0};
        int64_t area = 0;
        for (int64_t i = 0; i < npx; ++i) {
            if (!m[i]) continue;
            ++area;
            for (int64_t c = 0; c < 3; ++c) mean[c] += img.ptr()[c * npx + i];
        }
        if (area == 0) continue;
        for (auto& v : mean) v /= static_cast<double>(area);
        for (int64_t i = 0; i < npx; ++i) {
            if (!m[i]) continue;
            cover[i] += 1.f;
            for (int64_t c = 0; c < 3; ++c)
                color_sum[c * npx + i] += static_cast<float>(mean[c]);
        }
    }

    Tensor out = Tensor::zeros(img.shape());
    for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < npx; ++i) {
            const float painted = cover[i] > 0.f ? color_sum[c * npx + i] / cover[i] : 0.f;
            out.ptr()[c * npx + i] = alpha * img.ptr()[c * npx + i] + (1.f - alpha) * painted;
        }
    return out;
}

// ---------------------------------------------------------------------------
// RLE mask file format (masks.json)
// ---------------------------------------------------------------------------

/// Run lengths alternate 0s and 1s in row-major order, starting with the
/// count of 0s; runs must sum to H*W.
inline nlohmann::json mask_set_to_json(const MaskSet& ms) {
    nlohmann::json root;
    root["masks"] = nlohmann::json::array();
    for (const auto& m : ms.masks) {
        nlohmann::json jm;
        jm["height"] = ms.height;
        jm["width"] = ms.width;
        std::vector<int64_t> rle;
        int64_t run = 0;
        uint8_t cur = 0;
        for (size_t i = 0; i < m.size(); ++i) {
            if (m[i] == cur) {
                ++run;
            } else {
                rle.push_back(run);
                cur = m[i];
                run = 1;
            }
        }
        rle.push_back(run);
        jm["rle"] = rle;
        root["masks"].push_back(std::move(jm));
    }
    return root;
}

inline MaskSet mask_set_from_json(const nlohmann::json& root) {
    SGSF_CHECK(root.contains("masks") && root["masks"].is_array(),
               "masks.json: missing 'masks' array");
    MaskSet ms;
    ms.source = MaskSet::Source::File;
    for (const auto& jm : root["masks"]) {
        const int64_t h = jm.at("height").get<int64_t>();
        const int64_t w = jm.at("width").get<int64_t>();
        if (ms.masks.empty()) {
            ms.height = h;
            ms.width = w;
        }
        SGSF_CHECK(h == ms.height && w == ms.width,
                   "masks.json: inconsistent mask extents");
        std::vector<uint8_t> mask;
        mask.reserve(h * w);
        uint8_t cur = 0;
        for (const auto& r : jm.at("rle")) {
            const int64_t run = r.get<int64_t>();
            SGSF_CHECK(run >= 0, "masks.json: negative run length");
            mask.insert(mask.end(), run, cur);
            cur = 1 - cur;
        }
        SGSF_CHECK(static_cast<int64_t>(mask.size()) == h * w,
                   "masks.json: RLE runs sum to " << mask.size() << ", expected "
                                                  << h * w);
        ms.masks.push_back(std::move(mask));
    }
    return ms;
}

inline void save_mask_set(const MaskSet& ms, const std::string& path) {
    std::ofstream f(path);
    SGSF_CHECK(f.good(), "cannot open '" << path << "' for writing");
    f << mask_set_to_json(ms).dump(2) << "\n";
}

inline MaskSet load_mask_set(const std::string& path) {
    std::ifstream f(path);
    SGSF_CHECK(f.good(), "cannot open '" << path << "'");
    nlohmann::json root;
    f >> root;
    return mask_set_from_json(root);
}

}  // namespace sgsf
