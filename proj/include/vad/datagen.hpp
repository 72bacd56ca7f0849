#pragma once

// Moving-digit sequence generation: sprite ingestion (IDX or procedural
// fallback), constant-velocity bouncing trajectories, the two test-set
// corruption injectors, and the MMSQ dataset container.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "vad/frame.hpp"

namespace vad {

struct Sprite {
    int size = 28;
    std::vector<std::uint8_t> px;  // size*size, row-major
    int label = -1;

    std::uint8_t at(int y, int x) const { return px[static_cast<std::size_t>(y) * size + x]; }
};

struct Trajectory {
    double row = 0.0, col = 0.0;   // sprite top-left
    double vrow = 0.0, vcol = 0.0; // per-frame, constant magnitude between bounces
};

struct GenConfig {
    int frame_height = 64;
    int frame_width = 64;
    int frames = 20;          // T
    int digits = 2;
    int digit_size = 28;      // sprites are rescaled to this before placement
    double speed_min = 2.0;
    double speed_max = 4.0;
};

enum class CorruptionMode { Both, TemporalOnly, SpatialOnly, Mixed };

// Standard big-endian IDX3 container of 28x28 images.
std::vector<Sprite> load_sprites(const std::string& path);

// Hermetic fallback: ten procedural seven-segment style glyphs.
std::vector<Sprite> synthetic_sprites(int bar_thickness = 4);

// Bilinear rescale to size x size.
Sprite scale_sprite(const Sprite& s, int size);

LabeledSequence generate_sequence(const std::vector<Sprite>& sprites, std::mt19937_64& rng, const GenConfig& cfg);

// frame[T-1] := frame[0]; everything else untouched.
LabeledSequence corrupt_temporal(const LabeledSequence& seq);

// 3x3 black square centered on a uniformly chosen pixel of intensity >= 128
// in the last frame.
LabeledSequence corrupt_spatial(const LabeledSequence& seq, std::mt19937_64& rng);

std::vector<LabeledSequence> build_test_set(int n_normal, int n_corrupted, std::uint64_t seed,
                                            const std::vector<Sprite>& sprites, const GenConfig& cfg,
                                            CorruptionMode mode = CorruptionMode::Both);

std::vector<LabeledSequence> build_train_set(int n, std::uint64_t seed, const std::vector<Sprite>& sprites,
                                             const GenConfig& cfg);

// Per-sequence derived generator so datasets are deterministic and
// generation can be parallelized by index.
std::mt19937_64 sequence_rng(std::uint64_t seed, std::uint64_t index);

// MMSQ container: header (magic, version, count, T, H, W, C) then one record
// per sequence: label byte, corruption kind byte, square row/col, raw frames.
void write_dataset(const std::string& path, const std::vector<LabeledSequence>& data);
std::vector<LabeledSequence> read_dataset(const std::string& path);

}  // namespace vad
