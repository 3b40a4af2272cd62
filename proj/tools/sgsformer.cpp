// Command-line front end: dataset synthesis, segmentation, training,
// evaluation, inference and gradient verification.

#include <CLI11.hpp>

#include <iostream>

#include "sgsf/sgsf.hpp"

namespace {

constexpr const char* kVersion = "sgsformer 1.0.0";

using namespace sgsf;

sgsf::json checkpoint_config(const Checkpoint& ckpt) {
    if (ckpt.config_json.empty()) return sgsf::json::object();
    return sgsf::json::parse(ckpt.config_json);
}

/// Model config stored in the checkpoint wins over the command-line config so
/// weights always match the architecture they were trained with.
ModelConfig model_config_for(const Checkpoint& ckpt, const RunConfig& fallback) {
    const sgsf::json snap = checkpoint_config(ckpt);
    if (snap.contains("model"))
        return model_spec_from_json(snap["model"], "model.").config;
    return fallback.model.config;
}

void echo_config(const RunConfig& cfg) {
    std::cout << "effective config:\n" << run_config_to_json(cfg).dump(2) << "\n";
}

int cmd_simulate_dataset(const std::string& config_path, const std::string& out_dir,
                         int64_t count, const std::string& source,
                         const std::string& image_dir, int threads) {
    RunConfig cfg = load_run_config(config_path);
    echo_config(cfg);
    DatasetSource src;
    if (source == "procedural") src = DatasetSource::Procedural;
    else if (source == "image-dir") src = DatasetSource::ImageDir;
    else throw ConfigError("unknown dataset source '" + source + "'");
    gen_dataset(src, cfg.degrade, cfg.train.seed, count, cfg.train.patch, out_dir,
                image_dir, threads);
    std::cout << "wrote " << count << " samples to " << out_dir << "\n";
    return 0;
}

int cmd_segment(const std::string& in_path, const std::string& out_path,
                float threshold) {
    Tensor img = load_png_rgb(in_path);
    MaskSet masks = naive_segment(img, threshold);
    save_mask_set(masks, out_path);
    std::cout << "wrote " << masks.count() << " masks to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& resume_path) {
    RunConfig cfg = load_run_config(config_path);
    echo_config(cfg);
    LoadedDataset data = load_dataset(cfg.paths.data);

    Model model(cfg.model.config);
    AdamState optim = AdamState::make(model.registry());
    int64_t start_step = 0;
    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        start_step = restore_checkpoint(ckpt, model, optim);
        std::cout << "resumed from " << resume_path << " at step " << start_step << "\n";
    }

    std::ofstream csv;
    if (start_step == 0) {
        csv.open(cfg.paths.loss_log, std::ios::trunc);
        csv << kLossCsvHeader << "\n";
    } else {
        csv.open(cfg.paths.loss_log, std::ios::app);
    }
    SGSF_CHECK(csv.good(), "cannot open loss log '" << cfg.paths.loss_log << "'");

    const PerceptualPyramid pyramid;
    const sgsf::json snapshot = run_config_to_json(cfg);
    auto save = [&] {
        save_checkpoint(make_checkpoint(model, optim, snapshot), cfg.paths.checkpoint);
    };
    train_steps(model, optim, data, cfg, start_step, pyramid, [&](const StepLog& log) {
        csv << log.csv_row() << "\n";
        csv.flush();
        if (cfg.train.checkpoint_every > 0 &&
            (log.step + 1) % cfg.train.checkpoint_every == 0)
            save();
    });
    save();
    std::cout << "trained to step " << cfg.train.steps << "; checkpoint at "
              << cfg.paths.checkpoint << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& data_dir) {
    RunConfig cfg = load_run_config(config_path);
    echo_config(cfg);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Model model(model_config_for(ckpt, cfg));
    AdamState optim = AdamState::make(model.registry());
    restore_checkpoint(ckpt, model, optim);
    LoadedDataset data = load_dataset(data_dir.empty() ? cfg.paths.data : data_dir);
    const EvalReport report = eval_dataset(model, data);
    const sgsf::json j = eval_report_to_json(report);
    {
        std::ofstream f(cfg.paths.report, std::ios::trunc);
        SGSF_CHECK(f.good(), "cannot open report '" << cfg.paths.report << "'");
        f << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& in_path,
              const std::string& masks_path, const std::string& out_path,
              float threshold) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    RunConfig fallback;
    Model model(model_config_for(ckpt, fallback));
    AdamState optim = AdamState::make(model.registry());
    restore_checkpoint(ckpt, model, optim);

    Tensor img = load_png_rgb(in_path);
    MaskSet masks = masks_path.empty() ? naive_segment(img, threshold)
                                       : load_mask_set(masks_path);
    const int64_t h = img.dim(1), w = img.dim(2);
    Tensor out = model.forward(reshape(img, {1, 3, h, w}), {masks}, /*train=*/false);
    save_png_rgb(reshape(out, {3, h, w}), out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_grad_check(const std::string& module, int seeds) {
    auto items = grad_suite::items();
    bool all_pass = true;
    std::printf("%-24s %12s %10s %s\n", "op", "max_rel_err", "tol", "status");
    for (const auto& [name, fn] : items) {
        if (!module.empty() && name.find(module) == std::string::npos) continue;
        GradCheckResult worst{name, 0.0, 1e-3, true};
        for (int s = 0; s < seeds; ++s) {
            GradCheckResult r = fn(Rng::mix(0x5eed, static_cast<uint64_t>(s)));
            worst.max_rel_err = std::max(worst.max_rel_err, r.max_rel_err);
            worst.pass = worst.pass && r.pass;
        }
        all_pass = all_pass && worst.pass;
        std::printf("%-24s %12.3e %10.0e %s\n", worst.name.c_str(), worst.max_rel_err,
                    worst.tolerance, worst.pass ? "PASS" : "FAIL");
    }
    return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Segmentation-guided sparse transformer for under-display-camera "
                 "image restoration"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string config_path, out_dir, source = "procedural", image_dir;
    int64_t count = 16;
    int threads = 1;
    auto* sim = app.add_subcommand("simulate-dataset",
                                   "Synthesize a paired clean/degraded dataset");
    sim->add_option("--config", config_path, "Run config JSON")->required();
    sim->add_option("--out", out_dir, "Output dataset directory")->required();
    sim->add_option("--count", count, "Number of samples");
    sim->add_option("--source", source, "procedural or image-dir");
    sim->add_option("--image-dir", image_dir, "PNG directory for image-dir source");
    sim->add_option("--threads", threads, "Generation threads");

    std::string seg_in, seg_out;
    float threshold = 0.25f;
    auto* seg = app.add_subcommand("segment", "Naive instance segmentation to RLE masks");
    seg->add_option("--in", seg_in, "Input PNG")->required();
    seg->add_option("--out", seg_out, "Output masks.json")->required();
    seg->add_option("--threshold", threshold, "Color quantization threshold");

    std::string train_config, resume_path;
    auto* train = app.add_subcommand("train", "Train from a run config");
    train->add_option("--config", train_config, "Run config JSON")->required();
    train->add_option("--resume", resume_path, "Checkpoint to resume from");

    std::string eval_config, eval_ckpt, eval_data;
    auto* eval = app.add_subcommand("eval", "Evaluate PSNR/SSIM over a dataset");
    eval->add_option("--config", eval_config, "Run config JSON")->required();
    eval->add_option("--ckpt", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--data", eval_data, "Dataset dir (default: paths.data)");

    std::string inf_ckpt, inf_in, inf_masks, inf_out;
    auto* infer = app.add_subcommand("infer", "Restore one PNG");
    infer->add_option("--ckpt", inf_ckpt, "Checkpoint path")->required();
    infer->add_option("--in", inf_in, "Degraded input PNG")->required();
    infer->add_option("--masks", inf_masks, "masks.json (default: naive segmentation)");
    infer->add_option("--out", inf_out, "Restored output PNG")->required();
    infer->add_option("--threshold", threshold, "Naive segmentation threshold");

    std::string module;
    int seeds = 20;
    auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient suite");
    gc->add_option("--module", module, "Only ops whose name contains this substring");
    gc->add_option("--seeds", seeds, "Seeds per op");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        // Help/version exit cleanly; anything else is a usage error.
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed())
            return cmd_simulate_dataset(config_path, out_dir, count, source, image_dir,
                                        threads);
        if (seg->parsed()) return cmd_segment(seg_in, seg_out, threshold);
        if (train->parsed()) return cmd_train(train_config, resume_path);
        if (eval->parsed()) return cmd_eval(eval_config, eval_ckpt, eval_data);
        if (infer->parsed()) return cmd_infer(inf_ckpt, inf_in, inf_masks, inf_out, threshold);
        if (gc->parsed()) return cmd_grad_check(module, seeds);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
