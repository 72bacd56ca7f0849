#pragma once

// Grid occlusion masks: a shifted lattice of visible pixels, everything else
// occluded. Default periods (4,5) leave ~5% of a 64x64 frame visible.

#include <cstdint>
#include <random>
#include <vector>

#include "vad/frame.hpp"

namespace vad {

struct Mask {
    int height = 0;
    int width = 0;
    int period_rows = 4;
    int period_cols = 5;
    int shift_row = 0;
    int shift_col = 0;
    std::vector<std::uint8_t> visible;  // H*W, 1 = revealed

    bool is_visible(int y, int x) const { return visible[static_cast<std::size_t>(y) * width + x] != 0; }
    int visible_count() const;
    double masked_fraction() const;
};

// The masked frame keeps source values at visible pixels and fills occluded
// pixels with 0. The mask itself travels alongside so downstream consumers
// can tell genuine zeros from occlusions.
struct MaskedFrame {
    Frame values;
    Mask mask;
};

Mask grid_mask(int height, int width, int period_rows, int period_cols, std::mt19937_64& rng);

// Deterministic variant with explicit shifts; shifts must lie in [0, period).
Mask grid_mask_shifted(int height, int width, int period_rows, int period_cols, int shift_row, int shift_col);

MaskedFrame apply_mask(const Frame& frame, const Mask& mask);

}  // namespace vad
