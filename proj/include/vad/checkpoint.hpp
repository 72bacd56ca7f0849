#pragma once

// Named-tensor checkpoint container: header with format version, precision,
// hyperparameters and a tensor directory (name, shape, offset), followed by
// raw little-endian scalars. Round-trips bit-exactly.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vad/model.hpp"

namespace vad {

namespace ckpt_detail {

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const char* field) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("checkpoint: truncated while reading ") + field);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
    write_u32(out, static_cast<std::uint32_t>(v));
    write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint64_t read_u64(std::istream& in, const char* field) {
    std::uint64_t lo = read_u32(in, field);
    std::uint64_t hi = read_u32(in, field);
    return lo | (hi << 32);
}

}  // namespace ckpt_detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_hyper(std::ostream& out, const Hyper& h) {
    using ckpt_detail::write_u32;
    write_u32(out, static_cast<std::uint32_t>(h.in_channels));
    write_u32(out, static_cast<std::uint32_t>(h.hidden_ch));
    write_u32(out, static_cast<std::uint32_t>(h.context_len));
    write_u32(out, static_cast<std::uint32_t>(h.kernel));
    write_u32(out, static_cast<std::uint32_t>(h.bins));
    write_u32(out, static_cast<std::uint32_t>(h.enc_layers));
    write_u32(out, static_cast<std::uint32_t>(h.dec_layers));
    write_u32(out, static_cast<std::uint32_t>(h.meta_hidden));
    write_u32(out, static_cast<std::uint32_t>(h.att_ch));
    out.put(h.use_attention ? 1 : 0);
    out.put(h.use_masked_frame ? 1 : 0);
}

inline Hyper read_hyper(std::istream& in) {
    using ckpt_detail::read_u32;
    Hyper h;
    h.in_channels = static_cast<int>(read_u32(in, "in_channels"));
    h.hidden_ch = static_cast<int>(read_u32(in, "hidden_ch"));
    h.context_len = static_cast<int>(read_u32(in, "context_len"));
    h.kernel = static_cast<int>(read_u32(in, "kernel"));
    h.bins = static_cast<int>(read_u32(in, "bins"));
    h.enc_layers = static_cast<int>(read_u32(in, "enc_layers"));
    h.dec_layers = static_cast<int>(read_u32(in, "dec_layers"));
    h.meta_hidden = static_cast<int>(read_u32(in, "meta_hidden"));
    h.att_ch = static_cast<int>(read_u32(in, "att_ch"));
    int a = in.get(), m = in.get();
    if (a < 0 || m < 0) throw std::runtime_error("checkpoint: truncated hyper flags");
    h.use_attention = a != 0;
    h.use_masked_frame = m != 0;
    return h;
}

template <typename T>
void save_checkpoint(ModelParameters<T>& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write("VADC", 4);
    ckpt_detail::write_u32(out, kCheckpointVersion);
    out.put(static_cast<char>(sizeof(T)));  // precision: 4 = float, 8 = double
    write_hyper(out, params.hyper);
    auto named = params.named_tensors();
    ckpt_detail::write_u32(out, static_cast<std::uint32_t>(named.size()));
    std::uint64_t offset = 0;
    for (auto& [name, t] : named) {
        ckpt_detail::write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        ckpt_detail::write_u32(out, static_cast<std::uint32_t>(t->shape().size()));
        for (int d : t->shape()) ckpt_detail::write_u32(out, static_cast<std::uint32_t>(d));
        ckpt_detail::write_u64(out, offset);
        offset += t->numel() * sizeof(T);
    }
    for (auto& [name, t] : named)
        out.write(reinterpret_cast<const char*>(t->values().data()),
                  static_cast<std::streamsize>(t->numel() * sizeof(T)));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

template <typename T>
ModelParameters<T> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "VADC", 4) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const std::uint32_t version = ckpt_detail::read_u32(in, "version");
    if (version != kCheckpointVersion)
        throw std::runtime_error("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                                 std::to_string(kCheckpointVersion) + ")");
    const int precision = in.get();
    if (precision != static_cast<int>(sizeof(T)))
        throw std::runtime_error("checkpoint: precision is " + std::to_string(precision * 8) +
                                 "-bit but this run uses " + std::to_string(sizeof(T) * 8) + "-bit scalars");
    Hyper hyper = read_hyper(in);
    std::mt19937_64 rng(0);
    ModelParameters<T> params = init_params<T>(hyper, rng);
    auto named = params.named_tensors();
    const std::uint32_t count = ckpt_detail::read_u32(in, "tensor count");
    if (count != named.size())
        throw std::runtime_error("checkpoint: directory lists " + std::to_string(count) + " tensors, model needs " +
                                 std::to_string(named.size()));
    struct Entry {
        std::string name;
        Shape shape;
        std::uint64_t offset;
    };
    std::vector<Entry> entries(count);
    for (auto& e : entries) {
        const std::uint32_t len = ckpt_detail::read_u32(in, "name length");
        e.name.resize(len);
        if (!in.read(e.name.data(), len)) throw std::runtime_error("checkpoint: truncated tensor name");
        const std::uint32_t ndim = ckpt_detail::read_u32(in, "rank");
        e.shape.resize(ndim);
        for (auto& d : e.shape) d = static_cast<int>(ckpt_detail::read_u32(in, "dim"));
        e.offset = ckpt_detail::read_u64(in, "offset");
    }
    std::uint64_t expected_offset = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        auto& [name, t] = named[i];
        if (e.name != name)
            throw std::runtime_error("checkpoint: tensor '" + e.name + "' where '" + name + "' was expected");
        if (e.shape != t->shape())
            throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " + shape_str(e.shape) +
                                     ", model needs " + shape_str(t->shape()));
        if (e.offset != expected_offset)
            throw std::runtime_error("checkpoint: tensor '" + name + "' offset mismatch");
        expected_offset += t->numel() * sizeof(T);
        if (!in.read(reinterpret_cast<char*>(t->mutable_values().data()),
                     static_cast<std::streamsize>(t->numel() * sizeof(T))))
            throw std::runtime_error("checkpoint: truncated data for tensor '" + name + "'");
    }
    return params;
}

}  // namespace vad
