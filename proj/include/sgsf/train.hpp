#pragma once

#include "sgsf/augment.hpp"
#include "sgsf/loss.hpp"
#include "sgsf/metrics.hpp"
#include "sgsf/optim.hpp"

namespace sgsf {

inline const char* kLossCsvHeader = "step,lr,l1,psnr_term,ssim_term,perc_term,total";

// ---------------------------------------------------------------------------
// Checkpoint glue
// ---------------------------------------------------------------------------

inline Checkpoint make_checkpoint(const Model& model, const AdamState& optim,
                                  const json& config_snapshot) {
    Checkpoint ckpt;
    ckpt.tensors = registry_tensors(model.registry());
    const auto& params = model.registry().all();
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor m = Tensor::from_data(params[i].tensor.shape(), optim.m[i]);
        Tensor v = Tensor::from_data(params[i].tensor.shape(), optim.v[i]);
        ckpt.optim_tensors.emplace_back("m." + params[i].name, m);
        ckpt.optim_tensors.emplace_back("v." + params[i].name, v);
    }
    ckpt.optim_tensors.emplace_back(
        "step", Tensor::from_data({1}, {static_cast<float>(optim.step)}));
    ckpt.config_json = config_snapshot.dump();
    return ckpt;
}

/// Restores parameters and optimizer moments; returns the stored step count.
inline int64_t restore_checkpoint(const Checkpoint& ckpt, Model& model,
                                  AdamState& optim) {
    load_into_registry(ckpt.tensors, model.registry());
    const auto& params = model.registry().all();
    SGSF_CHECK(ckpt.optim_tensors.size() == 2 * params.size() + 1,
               "checkpoint: optimizer section holds " << ckpt.optim_tensors.size()
                                                      << " tensors, expected "
                                                      << 2 * params.size() + 1);
    int64_t step = -1;
    for (const auto& [name, t] : ckpt.optim_tensors) {
        if (name == "step") {
            step = static_cast<int64_t>(t.ptr()[0]);
            continue;
        }
        const bool is_m = name.rfind("m.", 0) == 0;
        const bool is_v = name.rfind("v.", 0) == 0;
        SGSF_CHECK(is_m || is_v, "checkpoint: unknown optimizer tensor '" << name << "'");
        const std::string pname = name.substr(2);
        SGSF_CHECK(model.registry().contains(pname),
                   "checkpoint: optimizer tensor for unknown parameter '" << pname << "'");
        size_t idx = 0;
        for (; idx < params.size(); ++idx)
            if (params[idx].name == pname) break;
        auto& dst = is_m ? optim.m[idx] : optim.v[idx];
        SGSF_CHECK(t.numel() == static_cast<int64_t>(dst.size()),
                   "checkpoint: optimizer tensor '" << name << "' has wrong size");
        std::copy(t.ptr(), t.ptr() + t.numel(), dst.begin());
    }
    SGSF_CHECK(step >= 0, "checkpoint: missing optimizer step count");
    optim.step = step;
    return step;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct StepLog {
    int64_t step;
    double lr;
    float l1, psnr_term, ssim_term, perc_term, total;

    std::string csv_row() const {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                      static_cast<long long>(step), lr, static_cast<double>(l1),
                      static_cast<double>(psnr_term), static_cast<double>(ssim_term),
                      static_cast<double>(perc_term), static_cast<double>(total));
        return buf;
    }
};

/// Runs optimizer steps [start_step, cfg.train.steps). Every source of
/// randomness (batch choice, crops, augmentation) derives from
/// (train.seed, absolute step), so resuming from a checkpoint continues the
/// interrupted trajectory bit-exactly. `end_step` (when >= 0) stops early
/// without changing the schedule, emulating an interrupted run.
template <class StepCallback>
std::vector<StepLog> train_steps(Model& model, AdamState& optim,
                                 const LoadedDataset& data, const RunConfig& cfg,
                                 int64_t start_step, const PerceptualPyramid& pyramid,
                                 StepCallback&& on_step, int64_t end_step = -1) {
    const int64_t steps = end_step < 0 ? cfg.train.steps
                                       : std::min(end_step, cfg.train.steps);
    const int64_t patch = cfg.train.patch;
    const int64_t batch = cfg.train.batch;
    // The early->late switch is a property of the configured run length, not
    // of where an interrupted run stopped.
    const int64_t switch_step = static_cast<int64_t>(
        cfg.train.stage_switch * static_cast<double>(cfg.train.steps));
    std::vector<StepLog> logs;

    for (int64_t t = start_step; t < steps; ++t) {
        Rng rng(Rng::mix(cfg.train.seed, static_cast<uint64_t>(t)));

        Tensor in = Tensor::zeros({batch, 3, patch, patch});
        Tensor gt = Tensor::zeros({batch, 3, patch, patch});
        std::vector<MaskSet> masks;
        for (int64_t b = 0; b < batch; ++b) {
            const int64_t idx = rng.uniform_int(static_cast<int64_t>(data.samples.size()));
            const DatasetSample& src = data.samples[idx];
            const int64_t h = src.clean.dim(1), w = src.clean.dim(2);
            SGSF_CHECK(h >= patch && w >= patch,
                       "sample " << idx << " smaller than training patch");
            const int64_t y0 = h == patch ? 0 : rng.uniform_int(h - patch + 1);
            const int64_t x0 = w == patch ? 0 : rng.uniform_int(w - patch + 1);
            DatasetSample s = crop_sample(src, y0, x0, patch);
            const AugmentOp op = sample_augment(rng);
            s.degraded = apply_augment(s.degraded, op);
            s.clean = apply_augment(s.clean, op);
            s.masks = apply_augment(s.masks, op);
            std::copy(s.degraded.ptr(), s.degraded.ptr() + s.degraded.numel(),
                      in.ptr() + b * 3 * patch * patch);
            std::copy(s.clean.ptr(), s.clean.ptr() + s.clean.numel(),
                      gt.ptr() + b * 3 * patch * patch);
            masks.push_back(std::move(s.masks));
        }

        Tensor out = model.forward(in, masks, /*train=*/true);
        const LossWeights w = t < switch_step ? LossWeights::early() : LossWeights::late();
        LossTerms<float> terms = loss_total(out, gt, w, pyramid);
        model.registry().zero_grad();
        backward(terms.total);
        const double lr = cyclic_lr(t, cfg.train.lr_lo, cfg.train.lr_hi, cfg.train.lr_period);
        adam_step(model.registry(), optim, lr);

        logs.push_back(StepLog{t, lr, terms.l1.item(), terms.psnr_term.item(),
                               terms.ssim_term.item(), terms.perc_term.item(),
                               terms.total.item()});
        on_step(logs.back());
    }
    return logs;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    double baseline_psnr_mean = 0.0;
    double baseline_ssim_mean = 0.0;
    int64_t n = 0;
    int64_t param_count = 0;
    int64_t base_width = 0;
};

inline EvalReport eval_dataset(Model& model, const LoadedDataset& data) {
    EvalReport r;
    r.param_count = model.param_count();
    r.base_width = model.config().base_width;
    for (const auto& s : data.samples) {
        const int64_t h = s.clean.dim(1), w = s.clean.dim(2);
        Tensor in = reshape(s.degraded, {1, 3, h, w});
        Tensor out = model.forward(in, {s.masks}, /*train=*/false);
        Tensor restored = reshape(out, {3, h, w});
        r.psnr_mean += psnr(restored, s.clean);
        r.ssim_mean += ssim(restored, s.clean);
        r.baseline_psnr_mean += psnr(s.degraded, s.clean);
        r.baseline_ssim_mean += ssim(s.degraded, s.clean);
        ++r.n;
    }
    if (r.n > 0) {
        r.psnr_mean /= r.n;
        r.ssim_mean /= r.n;
        r.baseline_psnr_mean /= r.n;
        r.baseline_ssim_mean /= r.n;
    }
    return r;
}

inline json eval_report_to_json(const EvalReport& r) {
    return json{{"psnr_mean", r.psnr_mean},
                {"ssim_mean", r.ssim_mean},
                {"baseline_psnr_mean", r.baseline_psnr_mean},
                {"baseline_ssim_mean", r.baseline_ssim_mean},
                {"n", r.n},
                {"param_count", r.param_count},
                {"base_width", r.base_width}};
}

}  // namespace sgsf
