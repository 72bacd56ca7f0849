#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vad {

// A quantized intensity grid, channels-last per pixel: values[(y*w + x)*c + ch].
struct Frame {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<std::uint8_t> values;

    Frame() = default;
    Frame(int h, int w, int c) : height(h), width(w), channels(c),
                                 values(static_cast<std::size_t>(h) * w * c, 0) {}

    std::uint8_t& at(int y, int x, int c = 0) {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t at(int y, int x, int c = 0) const {
        return values[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool same_dims(const Frame& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

struct Sequence {
    std::vector<Frame> frames;

    int length() const { return static_cast<int>(frames.size()); }
    void check_uniform() const {
        if (frames.size() < 2) throw std::invalid_argument("sequence: need at least 2 frames, got " +
                                                           std::to_string(frames.size()));
        for (const auto& f : frames)
            if (!f.same_dims(frames.front()))
                throw std::invalid_argument("sequence: frames have mismatched dimensions");
    }
};

enum class CorruptionKind : std::uint8_t { None = 0, Temporal = 1, Spatial = 2, Both = 3 };

struct CorruptionMeta {
    CorruptionKind kind = CorruptionKind::None;
    int square_row = -1;  // center of the 3x3 black square, when spatial
    int square_col = -1;
};

struct LabeledSequence {
    Sequence sequence;
    bool corrupted = false;
    CorruptionMeta meta;  // kind None iff !corrupted
};

}  // namespace vad
