#include "vad/masking.hpp"

#include <stdexcept>
#include <string>

namespace vad {

int Mask::visible_count() const {
    int n = 0;
    for (auto v : visible) n += v != 0;
    return n;
}

double Mask::masked_fraction() const {
    return 1.0 - static_cast<double>(visible_count()) / (static_cast<double>(height) * width);
}

Mask grid_mask_shifted(int height, int width, int period_rows, int period_cols, int shift_row, int shift_col) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("grid_mask: nonpositive dimensions");
    if (period_rows < 1 || period_rows > height)
        throw std::invalid_argument("grid_mask: period_rows " + std::to_string(period_rows) +
                                    " out of range for height " + std::to_string(height));
    if (period_cols < 1 || period_cols > width)
        throw std::invalid_argument("grid_mask: period_cols " + std::to_string(period_cols) +
                                    " out of range for width " + std::to_string(width));
    if (shift_row < 0 || shift_row >= period_rows || shift_col < 0 || shift_col >= period_cols)
        throw std::invalid_argument("grid_mask: shifts must lie in [0, period)");
    Mask m;
    m.height = height;
    m.width = width;
    m.period_rows = period_rows;
    m.period_cols = period_cols;
    m.shift_row = shift_row;
    m.shift_col = shift_col;
    m.visible.assign(static_cast<std::size_t>(height) * width, 0);
    for (int y = shift_row; y < height; y += period_rows)
        for (int x = shift_col; x < width; x += period_cols)
            m.visible[static_cast<std::size_t>(y) * width + x] = 1;
    return m;
}

Mask grid_mask(int height, int width, int period_rows, int period_cols, std::mt19937_64& rng) {
    if (period_rows < 1 || period_cols < 1) throw std::invalid_argument("grid_mask: periods must be >= 1");
    std::uniform_int_distribution<int> dr(0, period_rows - 1);
    std::uniform_int_distribution<int> dc(0, period_cols - 1);
    const int sr = dr(rng);
    const int sc = dc(rng);
    return grid_mask_shifted(height, width, period_rows, period_cols, sr, sc);
}

MaskedFrame apply_mask(const Frame& frame, const Mask& mask) {
    if (frame.height != mask.height || frame.width != mask.width)
        throw std::invalid_argument("apply_mask: frame " + std::to_string(frame.height) + "x" +
                                    std::to_string(frame.width) + " vs mask " + std::to_string(mask.height) + "x" +
                                    std::to_string(mask.width));
    MaskedFrame out;
    out.mask = mask;
    out.values = Frame(frame.height, frame.width, frame.channels);
    for (int y = 0; y < frame.height; ++y)
        for (int x = 0; x < frame.width; ++x)
            if (mask.is_visible(y, x))
                for (int c = 0; c < frame.channels; ++c) out.values.at(y, x, c) = frame.at(y, x, c);
    return out;
}

}  // namespace vad
