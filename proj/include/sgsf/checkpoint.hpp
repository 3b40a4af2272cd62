#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sgsf/tensor.hpp"

namespace sgsf {

/// Named-tensor store with a bit-exact binary layout (little-endian):
/// magic "SGSF", u32 version, u32 tensor_count, per tensor
/// {u32 name_len, name, u32 rank, u64 dims[rank], u8 dtype(0=f32), raw data};
/// then an optimizer-state section with identical encoding; then
/// u32 config_len + UTF-8 JSON config snapshot.
struct Checkpoint {
    static constexpr uint32_t kVersion = 1;
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::vector<std::pair<std::string, Tensor>> optim_tensors;
    std::string config_json;
};

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
inline uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    SGSF_CHECK(is.good(), "checkpoint: truncated file");
    return v;
}
inline uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    SGSF_CHECK(is.good(), "checkpoint: truncated file");
    return v;
}

inline void write_tensor_section(std::ostream& os,
                                 const std::vector<std::pair<std::string, Tensor>>& ts) {
    write_u32(os, static_cast<uint32_t>(ts.size()));
    for (const auto& [name, t] : ts) {
        write_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<uint32_t>(t.rank()));
        for (size_t i = 0; i < t.rank(); ++i)
            write_u64(os, static_cast<uint64_t>(t.dim(i)));
        const uint8_t dtype = 0;  // f32
        os.write(reinterpret_cast<const char*>(&dtype), 1);
        os.write(reinterpret_cast<const char*>(t.ptr()),
                 static_cast<std::streamsize>(t.numel() * sizeof(float)));
    }
}

inline std::vector<std::pair<std::string, Tensor>> read_tensor_section(std::istream& is) {
    const uint32_t count = read_u32(is);
    std::vector<std::pair<std::string, Tensor>> ts;
    ts.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        SGSF_CHECK(is.good(), "checkpoint: truncated file");
        const uint32_t rank = read_u32(is);
        Shape shape(rank);
        for (uint32_t d = 0; d < rank; ++d)
            shape[d] = static_cast<int64_t>(read_u64(is));
        uint8_t dtype = 0xff;
        is.read(reinterpret_cast<char*>(&dtype), 1);
        SGSF_CHECK(is.good(), "checkpoint: truncated file");
        SGSF_CHECK(dtype == 0, "checkpoint: unsupported dtype " << int(dtype));
        Tensor t = Tensor::zeros(shape);
        is.read(reinterpret_cast<char*>(t.ptr()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        SGSF_CHECK(is.good(), "checkpoint: truncated file");
        ts.emplace_back(std::move(name), std::move(t));
    }
    return ts;
}

}  // namespace detail

/// Atomic write: the file appears under its final name only when complete.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        SGSF_CHECK(os.good(), "cannot open '" << tmp << "' for writing");
        os.write("SGSF", 4);
        detail::write_u32(os, Checkpoint::kVersion);
        detail::write_tensor_section(os, ckpt.tensors);
        detail::write_tensor_section(os, ckpt.optim_tensors);
        detail::write_u32(os, static_cast<uint32_t>(ckpt.config_json.size()));
        os.write(ckpt.config_json.data(),
                 static_cast<std::streamsize>(ckpt.config_json.size()));
        SGSF_CHECK(os.good(), "write to '" << tmp << "' failed");
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    SGSF_CHECK(is.good(), "cannot open '" << path << "'");
    char magic[4] = {};
    is.read(magic, 4);
    SGSF_CHECK(is.good() && std::string(magic, 4) == "SGSF",
               "checkpoint: bad magic in '" << path << "'");
    const uint32_t version = detail::read_u32(is);
    SGSF_CHECK(version == Checkpoint::kVersion,
               "checkpoint: unsupported version " << version);
    Checkpoint ckpt;
    ckpt.tensors = detail::read_tensor_section(is);
    ckpt.optim_tensors = detail::read_tensor_section(is);
    const uint32_t cfg_len = detail::read_u32(is);
    ckpt.config_json.resize(cfg_len);
    is.read(ckpt.config_json.data(), cfg_len);
    SGSF_CHECK(is.good(), "checkpoint: truncated file");
    return ckpt;
}

/// Copies checkpoint tensors into a registry. Every registry parameter must
/// be present with a matching shape and no extra names may appear.
template <class T>
void load_into_registry(const std::vector<std::pair<std::string, Tensor>>& tensors,
                        ParamRegistryT<T>& reg) {
    SGSF_CHECK(tensors.size() == reg.size(),
               "checkpoint holds " << tensors.size() << " tensors, model expects "
                                   << reg.size());
    for (const auto& [name, t] : tensors) {
        SGSF_CHECK(reg.contains(name), "checkpoint: unknown tensor name '" << name << "'");
        TensorT<T> dst = reg.get(name);
        SGSF_CHECK(t.shape() == dst.shape(),
                   "checkpoint: shape mismatch for '" << name << "': file "
                                                      << shape_str(t.shape()) << " vs model "
                                                      << shape_str(dst.shape()));
        for (int64_t i = 0; i < t.numel(); ++i)
            dst.ptr()[i] = static_cast<T>(t.ptr()[i]);
    }
}

template <class T>
std::vector<std::pair<std::string, Tensor>> registry_tensors(const ParamRegistryT<T>& reg) {
    std::vector<std::pair<std::string, Tensor>> out;
    out.reserve(reg.size());
    for (const auto& p : reg.all())
        out.emplace_back(p.name, p.tensor.template cast<float>());
    return out;
}

}  // namespace sgsf
