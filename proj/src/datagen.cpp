#include "vad/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vad {

namespace {

std::uint32_t read_be32(std::istream& in, const char* what, std::streamoff offset) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("idx: truncated while reading ") + what + " at offset " +
                                 std::to_string(offset));
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

void write_le32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_le32(std::istream& in, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw std::runtime_error(std::string("mmsq: truncated while reading ") + what);
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

}  // namespace

std::vector<Sprite> load_sprites(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + path);
    const std::uint32_t magic = read_be32(in, "magic", 0);
    if (magic != 0x00000803u)
        throw std::runtime_error("idx: bad magic 0x" + std::to_string(magic) + " at offset 0 in " + path);
    const std::uint32_t count = read_be32(in, "count", 4);
    const std::uint32_t rows = read_be32(in, "rows", 8);
    const std::uint32_t cols = read_be32(in, "cols", 12);
    if (rows != 28 || cols != 28)
        throw std::runtime_error("idx: expected 28x28 images, got " + std::to_string(rows) + "x" +
                                 std::to_string(cols));
    std::vector<Sprite> out(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        out[i].size = 28;
        out[i].px.resize(28 * 28);
        if (!in.read(reinterpret_cast<char*>(out[i].px.data()), 28 * 28))
            throw std::runtime_error("idx: truncated at image " + std::to_string(i) + " (offset " +
                                     std::to_string(16 + std::size_t(i) * 28 * 28) + ")");
    }
    return out;
}

namespace {

// Seven-segment layout: segments a..g as thick bars on a 28x28 canvas.
//   a: top, b: top-right, c: bottom-right, d: bottom, e: bottom-left,
//   f: top-left, g: middle
const int kSegments[10] = {
    0b1111110,  // 0: abcdef
    0b0110000,  // 1: bc
    0b1101101,  // 2: abdeg
    0b1111001,  // 3: abcdg
    0b0110011,  // 4: bcfg
    0b1011011,  // 5: acdfg
    0b1011111,  // 6: acdefg
    0b1110000,  // 7: abc
    0b1111111,  // 8
    0b1111011,  // 9: abcdfg
};

void fill_rect(Sprite& s, int y0, int y1, int x0, int x1) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) s.px[static_cast<std::size_t>(y) * s.size + x] = 255;
}

}  // namespace

std::vector<Sprite> synthetic_sprites(int bar_thickness) {
    if (bar_thickness < 1 || bar_thickness > 10)
        throw std::invalid_argument("synthetic_sprites: bar thickness outside [1,10]");
    std::vector<Sprite> out(10);
    const int t = bar_thickness;
    const int x0 = 5, x1 = 23; // glyph box
    const int y0 = 2, y1 = 26, ym = 12;
    for (int d = 0; d < 10; ++d) {
        Sprite& s = out[d];
        s.size = 28;
        s.label = d;
        s.px.assign(28 * 28, 0);
        const int seg = kSegments[d];
        if (seg & 0b1000000) fill_rect(s, y0, y0 + t, x0, x1);            // a
        if (seg & 0b0100000) fill_rect(s, y0, ym + t / 2, x1 - t, x1);    // b
        if (seg & 0b0010000) fill_rect(s, ym + t / 2, y1, x1 - t, x1);    // c
        if (seg & 0b0001000) fill_rect(s, y1 - t, y1, x0, x1);            // d
        if (seg & 0b0000100) fill_rect(s, ym + t / 2, y1, x0, x0 + t);    // e
        if (seg & 0b0000010) fill_rect(s, y0, ym + t / 2, x0, x0 + t);    // f
        if (seg & 0b0000001) fill_rect(s, ym - t / 2, ym + t / 2, x0, x1); // g
    }
    return out;
}

Sprite scale_sprite(const Sprite& s, int size) {
    if (size <= 0) throw std::invalid_argument("scale_sprite: nonpositive size");
    if (size == s.size) return s;
    Sprite out;
    out.size = size;
    out.label = s.label;
    out.px.resize(static_cast<std::size_t>(size) * size);
    const double sy = static_cast<double>(s.size) / size;
    const double sx = sy;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double fy = (y + 0.5) * sy - 0.5;
            const double fx = (x + 0.5) * sx - 0.5;
            const int iy = std::clamp(static_cast<int>(std::floor(fy)), 0, s.size - 1);
            const int ix = std::clamp(static_cast<int>(std::floor(fx)), 0, s.size - 1);
            const int iy1 = std::min(iy + 1, s.size - 1);
            const int ix1 = std::min(ix + 1, s.size - 1);
            const double wy = std::clamp(fy - iy, 0.0, 1.0);
            const double wx = std::clamp(fx - ix, 0.0, 1.0);
            const double v = (1 - wy) * ((1 - wx) * s.at(iy, ix) + wx * s.at(iy, ix1)) +
                             wy * ((1 - wx) * s.at(iy1, ix) + wx * s.at(iy1, ix1));
            out.px[static_cast<std::size_t>(y) * size + x] = static_cast<std::uint8_t>(std::lround(v));
        }
    return out;
}

LabeledSequence generate_sequence(const std::vector<Sprite>& sprites, std::mt19937_64& rng, const GenConfig& cfg) {
    if (sprites.empty()) throw std::invalid_argument("generate_sequence: no sprites");
    if (cfg.digit_size > cfg.frame_height || cfg.digit_size > cfg.frame_width)
        throw std::invalid_argument("generate_sequence: digit size " + std::to_string(cfg.digit_size) +
                                    " exceeds frame " + std::to_string(cfg.frame_height) + "x" +
                                    std::to_string(cfg.frame_width));
    std::uniform_int_distribution<std::size_t> pick(0, sprites.size() - 1);
    std::uniform_real_distribution<double> uangle(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> uspeed(cfg.speed_min, cfg.speed_max);
    const double max_row = cfg.frame_height - cfg.digit_size;
    const double max_col = cfg.frame_width - cfg.digit_size;
    std::uniform_real_distribution<double> urow(0.0, max_row);
    std::uniform_real_distribution<double> ucol(0.0, max_col);

    std::vector<Sprite> chosen;
    std::vector<Trajectory> traj;
    for (int d = 0; d < cfg.digits; ++d) {
        Sprite s = sprites[pick(rng)];
        if (s.size != cfg.digit_size) s = scale_sprite(s, cfg.digit_size);
        chosen.push_back(std::move(s));
        Trajectory t;
        t.row = urow(rng);
        t.col = ucol(rng);
        const double angle = uangle(rng);
        const double speed = uspeed(rng);
        t.vrow = speed * std::sin(angle);
        t.vcol = speed * std::cos(angle);
        traj.push_back(t);
    }

    LabeledSequence out;
    out.corrupted = false;
    for (int f = 0; f < cfg.frames; ++f) {
        Frame frame(cfg.frame_height, cfg.frame_width, 1);
        for (int d = 0; d < cfg.digits; ++d) {
            const int r0 = static_cast<int>(std::lround(traj[d].row));
            const int c0 = static_cast<int>(std::lround(traj[d].col));
            const Sprite& s = chosen[d];
            for (int y = 0; y < s.size; ++y)
                for (int x = 0; x < s.size; ++x) {
                    auto& dst = frame.at(r0 + y, c0 + x);
                    dst = std::max(dst, s.at(y, x));  // overlap by per-pixel max
                }
        }
        out.sequence.frames.push_back(std::move(frame));
        for (auto& t : traj) {
            t.row += t.vrow;
            t.col += t.vcol;
            // elastic reflection keeps the sprite fully inside the frame
            while (t.row < 0.0 || t.row > max_row) {
                if (t.row < 0.0) t.row = -t.row;
                if (t.row > max_row) t.row = 2.0 * max_row - t.row;
                t.vrow = -t.vrow;
            }
            while (t.col < 0.0 || t.col > max_col) {
                if (t.col < 0.0) t.col = -t.col;
                if (t.col > max_col) t.col = 2.0 * max_col - t.col;
                t.vcol = -t.vcol;
            }
        }
    }
    return out;
}

LabeledSequence corrupt_temporal(const LabeledSequence& seq) {
    LabeledSequence out = seq;
    out.sequence.frames.back() = out.sequence.frames.front();
    out.corrupted = true;
    out.meta.kind = seq.meta.kind == CorruptionKind::Spatial ? CorruptionKind::Both : CorruptionKind::Temporal;
    return out;
}

LabeledSequence corrupt_spatial(const LabeledSequence& seq, std::mt19937_64& rng) {
    LabeledSequence out = seq;
    Frame& last = out.sequence.frames.back();
    std::vector<std::pair<int, int>> lit;
    for (int y = 0; y < last.height; ++y)
        for (int x = 0; x < last.width; ++x)
            if (last.at(y, x) >= 128) lit.emplace_back(y, x);
    if (lit.empty()) throw std::invalid_argument("corrupt_spatial: no pixel with intensity >= 128 in last frame");
    std::uniform_int_distribution<std::size_t> pick(0, lit.size() - 1);
    const auto [cy, cx] = lit[pick(rng)];
    for (int y = std::max(0, cy - 1); y <= std::min(last.height - 1, cy + 1); ++y)
        for (int x = std::max(0, cx - 1); x <= std::min(last.width - 1, cx + 1); ++x)
            for (int c = 0; c < last.channels; ++c) last.at(y, x, c) = 0;
    out.corrupted = true;
    out.meta.kind = seq.meta.kind == CorruptionKind::Temporal ? CorruptionKind::Both : CorruptionKind::Spatial;
    out.meta.square_row = cy;
    out.meta.square_col = cx;
    return out;
}

std::mt19937_64 sequence_rng(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 step over (seed, index) so sequence streams are independent
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    return std::mt19937_64(z);
}

std::vector<LabeledSequence> build_train_set(int n, std::uint64_t seed, const std::vector<Sprite>& sprites,
                                             const GenConfig& cfg) {
    std::vector<LabeledSequence> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        auto rng = sequence_rng(seed, static_cast<std::uint64_t>(i));
        out.push_back(generate_sequence(sprites, rng, cfg));
    }
    return out;
}

std::vector<LabeledSequence> build_test_set(int n_normal, int n_corrupted, std::uint64_t seed,
                                            const std::vector<Sprite>& sprites, const GenConfig& cfg,
                                            CorruptionMode mode) {
    if (n_normal < 0 || n_corrupted < 0) throw std::invalid_argument("build_test_set: negative counts");
    std::vector<LabeledSequence> out;
    out.reserve(n_normal + n_corrupted);
    for (int i = 0; i < n_normal; ++i) {
        auto rng = sequence_rng(seed, static_cast<std::uint64_t>(i));
        out.push_back(generate_sequence(sprites, rng, cfg));
    }
    for (int i = 0; i < n_corrupted; ++i) {
        auto rng = sequence_rng(seed, static_cast<std::uint64_t>(n_normal + i));
        LabeledSequence seq = generate_sequence(sprites, rng, cfg);
        CorruptionMode kind = mode;
        if (mode == CorruptionMode::Mixed)
            kind = (i % 2 == 0) ? CorruptionMode::TemporalOnly : CorruptionMode::SpatialOnly;
        switch (kind) {
            case CorruptionMode::Both:
                seq = corrupt_spatial(corrupt_temporal(seq), rng);
                break;
            case CorruptionMode::TemporalOnly:
                seq = corrupt_temporal(seq);
                break;
            case CorruptionMode::SpatialOnly:
                seq = corrupt_spatial(seq, rng);
                break;
            case CorruptionMode::Mixed:
                break;  // unreachable
        }
        out.push_back(std::move(seq));
    }
    return out;
}

void write_dataset(const std::string& path, const std::vector<LabeledSequence>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("mmsq: cannot open " + path + " for writing");
    int t = 0, h = 0, w = 0, c = 1;
    if (!data.empty()) {
        t = data[0].sequence.length();
        h = data[0].sequence.frames[0].height;
        w = data[0].sequence.frames[0].width;
        c = data[0].sequence.frames[0].channels;
        for (const auto& s : data)
            if (s.sequence.length() != t || !s.sequence.frames[0].same_dims(data[0].sequence.frames[0]))
                throw std::invalid_argument("mmsq: sequences have mismatched dimensions");
    }
    out.write("MMSQ", 4);
    write_le32(out, 1);  // version
    write_le32(out, static_cast<std::uint32_t>(data.size()));
    write_le32(out, static_cast<std::uint32_t>(t));
    write_le32(out, static_cast<std::uint32_t>(h));
    write_le32(out, static_cast<std::uint32_t>(w));
    write_le32(out, static_cast<std::uint32_t>(c));
    for (const auto& s : data) {
        const std::uint8_t label = s.corrupted ? 1 : 0;
        const std::uint8_t kind = static_cast<std::uint8_t>(s.meta.kind);
        out.put(static_cast<char>(label));
        out.put(static_cast<char>(kind));
        write_le32(out, static_cast<std::uint32_t>(s.meta.square_row));
        write_le32(out, static_cast<std::uint32_t>(s.meta.square_col));
        for (const auto& f : s.sequence.frames)
            out.write(reinterpret_cast<const char*>(f.values.data()), static_cast<std::streamsize>(f.values.size()));
    }
    if (!out) throw std::runtime_error("mmsq: write failed for " + path);
}

std::vector<LabeledSequence> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("mmsq: cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "MMSQ", 4) != 0)
        throw std::runtime_error("mmsq: bad magic in " + path);
    const std::uint32_t version = read_le32(in, "version");
    if (version != 1) throw std::runtime_error("mmsq: unsupported version " + std::to_string(version));
    const std::uint32_t count = read_le32(in, "count");
    const int t = static_cast<int>(read_le32(in, "T"));
    const int h = static_cast<int>(read_le32(in, "H"));
    const int w = static_cast<int>(read_le32(in, "W"));
    const int c = static_cast<int>(read_le32(in, "C"));
    std::vector<LabeledSequence> out(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        int label = in.get();
        int kind = in.get();
        if (label < 0 || kind < 0) throw std::runtime_error("mmsq: truncated record " + std::to_string(i));
        out[i].corrupted = label != 0;
        out[i].meta.kind = static_cast<CorruptionKind>(kind);
        out[i].meta.square_row = static_cast<std::int32_t>(read_le32(in, "square_row"));
        out[i].meta.square_col = static_cast<std::int32_t>(read_le32(in, "square_col"));
        out[i].sequence.frames.reserve(t);
        for (int f = 0; f < t; ++f) {
            Frame frame(h, w, c);
            if (!in.read(reinterpret_cast<char*>(frame.values.data()),
                         static_cast<std::streamsize>(frame.values.size())))
                throw std::runtime_error("mmsq: truncated frames in record " + std::to_string(i));
            out[i].sequence.frames.push_back(std::move(frame));
        }
    }
    return out;
}

}  // namespace vad
