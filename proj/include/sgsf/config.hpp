#pragma once

#include <set>

#include <nlohmann/json.hpp>

#include "sgsf/degrade.hpp"
#include "sgsf/model.hpp"

namespace sgsf {

using json = nlohmann::json;

/// Configuration problems (unknown keys, bad types, bad values) are reported
/// separately from runtime failures so the CLI can map them to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& prefix) {
    if (!obj.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw ConfigError("unknown config key '" + prefix + key + "'");
    }
}

template <class T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for config key '") + key + "': " + e.what());
    }
}

template <class T, size_t N>
void read_array(const json& obj, const char* key, std::array<T, N>& out) {
    if (!obj.contains(key)) return;
    try {
        auto v = obj.at(key).get<std::vector<T>>();
        if (v.size() != N)
            throw ConfigError(std::string("config key '") + key + "' expects " +
                              std::to_string(N) + " entries");
        std::copy(v.begin(), v.end(), out.begin());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for config key '") + key + "': " + e.what());
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// PSF + degradation specs
// ---------------------------------------------------------------------------

struct PsfSpec {
    PsfKind kind = PsfKind::Gaussian;
    int64_t size = 9;
    PsfParams params;
};

inline Psf make_psf(const PsfSpec& spec) { return synth_psf(spec.kind, spec.size, spec.params); }

inline std::string psf_kind_name(PsfKind k) {
    switch (k) {
        case PsfKind::Gaussian: return "gaussian";
        case PsfKind::AiryLike: return "airy_like";
        case PsfKind::TwoLobe: return "two_lobe";
    }
    return "gaussian";
}

inline PsfKind psf_kind_from_name(const std::string& s) {
    if (s == "gaussian") return PsfKind::Gaussian;
    if (s == "airy_like") return PsfKind::AiryLike;
    if (s == "two_lobe") return PsfKind::TwoLobe;
    throw ConfigError("unknown psf kind '" + s + "'");
}

inline json psf_spec_to_json(const PsfSpec& s) {
    return json{{"kind", psf_kind_name(s.kind)},
                {"size", s.size},
                {"sigma", s.params.sigma},
                {"radius", s.params.radius},
                {"offset_x", s.params.offset_x},
                {"offset_y", s.params.offset_y},
                {"secondary_weight", s.params.secondary_weight},
                {"chromatic", s.params.chromatic}};
}

inline PsfSpec psf_spec_from_json(const json& j, const std::string& prefix) {
    detail::check_keys(j, {"kind", "size", "sigma", "radius", "offset_x", "offset_y",
                           "secondary_weight", "chromatic"},
                       prefix);
    PsfSpec s;
    std::string kind = psf_kind_name(s.kind);
    detail::read_field(j, "kind", kind);
    s.kind = psf_kind_from_name(kind);
    detail::read_field(j, "size", s.size);
    detail::read_field(j, "sigma", s.params.sigma);
    detail::read_field(j, "radius", s.params.radius);
    detail::read_field(j, "offset_x", s.params.offset_x);
    detail::read_field(j, "offset_y", s.params.offset_y);
    detail::read_field(j, "secondary_weight", s.params.secondary_weight);
    detail::read_field(j, "chromatic", s.params.chromatic);
    return s;
}

struct DegradeSpec {
    DegradeParams params;
    PsfSpec psf;
};

inline json degrade_spec_to_json(const DegradeSpec& s) {
    return json{{"model", s.params.model == DegradeModel::Simple ? "simple" : "hdr"},
                {"gamma", s.params.gamma},
                {"noise_sigma_read", s.params.noise_sigma_read},
                {"noise_sigma_shot", s.params.noise_sigma_shot},
                {"tone_c", s.params.tone_c},
                {"clip_max", s.params.clip_max},
                {"seed", s.params.seed},
                {"psf", psf_spec_to_json(s.psf)}};
}

inline DegradeSpec degrade_spec_from_json(const json& j, const std::string& prefix) {
    detail::check_keys(j, {"model", "gamma", "noise_sigma_read", "noise_sigma_shot",
                           "tone_c", "clip_max", "seed", "psf"},
                       prefix);
    DegradeSpec s;
    std::string model = "simple";
    detail::read_field(j, "model", model);
    if (model == "simple") s.params.model = DegradeModel::Simple;
    else if (model == "hdr") s.params.model = DegradeModel::Hdr;
    else throw ConfigError("unknown degrade model '" + model + "'");
    detail::read_field(j, "gamma", s.params.gamma);
    detail::read_field(j, "noise_sigma_read", s.params.noise_sigma_read);
    detail::read_field(j, "noise_sigma_shot", s.params.noise_sigma_shot);
    detail::read_field(j, "tone_c", s.params.tone_c);
    detail::read_field(j, "clip_max", s.params.clip_max);
    detail::read_field(j, "seed", s.params.seed);
    if (j.contains("psf")) s.psf = psf_spec_from_json(j["psf"], prefix + "psf.");
    try {
        s.params.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return s;
}

// ---------------------------------------------------------------------------
// Model config
// ---------------------------------------------------------------------------

inline json model_config_to_json(const ModelConfig& c, const std::string& preset) {
    return json{{"preset", preset},
                {"base_width", c.base_width},
                {"enc_caab_depths", c.enc_caab_depths},
                {"enc_transformer_depths", c.enc_transformer_depths},
                {"enc_heads", c.enc_heads},
                {"latent_depth", c.latent_depth},
                {"latent_heads", c.latent_heads},
                {"dec_module_counts", c.dec_module_counts},
                {"dec_heads", c.dec_heads},
                {"sparsity_ratio", c.sparsity_ratio},
                {"alpha", c.alpha},
                {"expansion", c.expansion},
                {"init_seed", c.init_seed}};
}

struct ModelSpec {
    std::string preset = "tiny";
    ModelConfig config;
};

inline ModelSpec model_spec_from_json(const json& j, const std::string& prefix) {
    detail::check_keys(j, {"preset", "base_width", "enc_caab_depths",
                           "enc_transformer_depths", "enc_heads", "latent_depth",
                           "latent_heads", "dec_module_counts", "dec_heads",
                           "sparsity_ratio", "alpha", "expansion", "init_seed"},
                       prefix);
    ModelSpec spec;
    detail::read_field(j, "preset", spec.preset);
    if (spec.preset == "tiny") spec.config = ModelConfig::tiny_preset();
    else if (spec.preset == "paper") spec.config = ModelConfig::paper_preset();
    else throw ConfigError("unknown model preset '" + spec.preset + "'");
    detail::read_field(j, "base_width", spec.config.base_width);
    detail::read_array(j, "enc_caab_depths", spec.config.enc_caab_depths);
    detail::read_array(j, "enc_transformer_depths", spec.config.enc_transformer_depths);
    detail::read_array(j, "enc_heads", spec.config.enc_heads);
    detail::read_field(j, "latent_depth", spec.config.latent_depth);
    detail::read_field(j, "latent_heads", spec.config.latent_heads);
    detail::read_array(j, "dec_module_counts", spec.config.dec_module_counts);
    detail::read_array(j, "dec_heads", spec.config.dec_heads);
    detail::read_field(j, "sparsity_ratio", spec.config.sparsity_ratio);
    detail::read_field(j, "alpha", spec.config.alpha);
    detail::read_field(j, "expansion", spec.config.expansion);
    detail::read_field(j, "init_seed", spec.config.init_seed);
    try {
        spec.config.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Training + paths + full run config
// ---------------------------------------------------------------------------

struct TrainConfig {
    int64_t steps = 300;
    int64_t batch = 4;
    int64_t patch = 64;
    uint64_t seed = 7;
    double stage_switch = 0.6;  // fraction of steps before the late weights
    double lr_lo = 1e-5;
    double lr_hi = 1e-4;
    int64_t lr_period = 200;
    int64_t checkpoint_every = 0;  // 0 = only at the end
};

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"steps", c.steps},       {"batch", c.batch},
                {"patch", c.patch},       {"seed", c.seed},
                {"stage_switch", c.stage_switch}, {"lr_lo", c.lr_lo},
                {"lr_hi", c.lr_hi},       {"lr_period", c.lr_period},
                {"checkpoint_every", c.checkpoint_every}};
}

inline TrainConfig train_config_from_json(const json& j, const std::string& prefix) {
    detail::check_keys(j, {"steps", "batch", "patch", "seed", "stage_switch", "lr_lo",
                           "lr_hi", "lr_period", "checkpoint_every"},
                       prefix);
    TrainConfig c;
    detail::read_field(j, "steps", c.steps);
    detail::read_field(j, "batch", c.batch);
    detail::read_field(j, "patch", c.patch);
    detail::read_field(j, "seed", c.seed);
    detail::read_field(j, "stage_switch", c.stage_switch);
    detail::read_field(j, "lr_lo", c.lr_lo);
    detail::read_field(j, "lr_hi", c.lr_hi);
    detail::read_field(j, "lr_period", c.lr_period);
    detail::read_field(j, "checkpoint_every", c.checkpoint_every);
    if (c.patch % 16 != 0) throw ConfigError("train.patch must be a multiple of 16");
    if (c.steps < 0 || c.batch < 1) throw ConfigError("train.steps/batch out of range");
    if (c.lr_period < 2 || c.lr_period % 2 != 0)
        throw ConfigError("train.lr_period must be even and >= 2");
    if (c.stage_switch < 0.0 || c.stage_switch > 1.0)
        throw ConfigError("train.stage_switch must be in [0,1]");
    return c;
}

struct PathsConfig {
    std::string data = "data";
    std::string checkpoint = "model.sgsf";
    std::string report = "report.json";
    std::string loss_log = "loss.csv";
};

inline json paths_config_to_json(const PathsConfig& c) {
    return json{{"data", c.data},
                {"checkpoint", c.checkpoint},
                {"report", c.report},
                {"loss_log", c.loss_log}};
}

inline PathsConfig paths_config_from_json(const json& j, const std::string& prefix) {
    detail::check_keys(j, {"data", "checkpoint", "report", "loss_log"}, prefix);
    PathsConfig c;
    detail::read_field(j, "data", c.data);
    detail::read_field(j, "checkpoint", c.checkpoint);
    detail::read_field(j, "report", c.report);
    detail::read_field(j, "loss_log", c.loss_log);
    return c;
}

struct RunConfig {
    ModelSpec model;
    DegradeSpec degrade;
    TrainConfig train;
    PathsConfig paths;
};

inline json run_config_to_json(const RunConfig& c) {
    return json{{"model", model_config_to_json(c.model.config, c.model.preset)},
                {"degrade", degrade_spec_to_json(c.degrade)},
                {"train", train_config_to_json(c.train)},
                {"paths", paths_config_to_json(c.paths)}};
}

inline RunConfig run_config_from_json(const json& j) {
    detail::check_keys(j, {"model", "degrade", "train", "paths"}, "");
    RunConfig c;
    if (j.contains("model")) c.model = model_spec_from_json(j["model"], "model.");
    if (j.contains("degrade")) c.degrade = degrade_spec_from_json(j["degrade"], "degrade.");
    if (j.contains("train")) c.train = train_config_from_json(j["train"], "train.");
    if (j.contains("paths")) c.paths = paths_config_from_json(j["paths"], "paths.");
    return c;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return run_config_from_json(j);
}

}  // namespace sgsf
