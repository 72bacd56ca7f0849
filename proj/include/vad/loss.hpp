#pragma once

// Per-pixel negative log-likelihood of the true intensity bins under the
// predicted categorical grid, the per-frame loss map, and the scalar
// anomaly score.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "vad/frame.hpp"
#include "vad/masking.hpp"
#include "vad/tensor.hpp"

namespace vad {

inline constexpr double kProbFloor = 1e-12;

enum class Scope { All, MaskedOnly };

struct LossMap {
    int height = 0;
    int width = 0;
    std::vector<double> nll;  // H*W, per-pixel sum over channels

    double at(int y, int x) const { return nll[static_cast<std::size_t>(y) * width + x]; }
};

struct AnomalyScore {
    double total_nll = 0.0;
    double mean_nll = 0.0;        // total / pixel-channel terms counted
    long pixels_counted = 0;
    Scope scope = Scope::All;
};

// Intensity -> bin index, floor(value * K / 256) for integers in [0,255].
inline int quantize_intensity(int value, int k) {
    if (k < 2 || 256 % k != 0)
        throw std::invalid_argument("quantize_intensity: K=" + std::to_string(k) + " must divide 256");
    if (value < 0 || value > 255)
        throw std::invalid_argument("quantize_intensity: value " + std::to_string(value) + " out of [0,255]");
    return value * k / 256;
}

inline int quantize_intensity(double value, int k) {
    if (k < 2) throw std::invalid_argument("quantize_intensity: K must be >= 2");
    if (value < 0.0 || value > 1.0)
        throw std::invalid_argument("quantize_intensity: value " + std::to_string(value) + " out of [0,1]");
    int bin = static_cast<int>(value * k);
    return bin >= k ? k - 1 : bin;
}

// Eq.-style per-frame loss: LossMap sums -log p over channels at every pixel;
// the score aggregates over the requested scope. Pure on values (no graph).
template <typename T>
std::pair<LossMap, AnomalyScore> frame_nll(const Tensor<T>& pred, const Frame& truth, const Mask& mask,
                                           Scope scope) {
    if (pred.shape().size() != 4)
        throw std::invalid_argument("frame_nll: prediction must be [H,W,C,K], got " + shape_str(pred.shape()));
    const int h = pred.shape()[0], w = pred.shape()[1], c = pred.shape()[2], k = pred.shape()[3];
    if (truth.height != h || truth.width != w || truth.channels != c)
        throw std::invalid_argument("frame_nll: truth " + std::to_string(truth.height) + "x" +
                                    std::to_string(truth.width) + "x" + std::to_string(truth.channels) +
                                    " vs prediction " + shape_str(pred.shape()));
    if (mask.height != h || mask.width != w)
        throw std::invalid_argument("frame_nll: mask dims mismatch");
    LossMap map;
    map.height = h;
    map.width = w;
    map.nll.assign(static_cast<std::size_t>(h) * w, 0.0);
    AnomalyScore score;
    score.scope = scope;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double pixel = 0.0;
            for (int ch = 0; ch < c; ++ch) {
                const int bin = quantize_intensity(static_cast<int>(truth.at(y, x, ch)), k);
                const double p = static_cast<double>(
                    pred.values()[((static_cast<std::size_t>(y) * w + x) * c + ch) * k + bin]);
                pixel += -std::log(std::max(p, kProbFloor));
            }
            map.nll[static_cast<std::size_t>(y) * w + x] = pixel;
            if (scope == Scope::All || !mask.is_visible(y, x)) {
                score.total_nll += pixel;
                score.pixels_counted += c;
            }
        }
    score.mean_nll = score.pixels_counted ? score.total_nll / score.pixels_counted : 0.0;
    return {map, score};
}

// Differentiable counterpart for training: scalar mean NLL per counted
// pixel-channel term over the scope.
template <typename T>
Tensor<T> nll_loss(const Tensor<T>& pred, const Frame& truth, const Mask& mask, Scope scope) {
    const int h = pred.shape()[0], w = pred.shape()[1], c = pred.shape()[2], k = pred.shape()[3];
    if (truth.height != h || truth.width != w || truth.channels != c)
        throw std::invalid_argument("nll_loss: truth dims vs prediction " + shape_str(pred.shape()));
    std::vector<int> bins(static_cast<std::size_t>(h) * w * c);
    std::vector<T> weights(bins.size(), T(0));
    long counted = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const bool in_scope = scope == Scope::All || !mask.is_visible(y, x);
            for (int ch = 0; ch < c; ++ch) {
                const std::size_t i = (static_cast<std::size_t>(y) * w + x) * c + ch;
                bins[i] = quantize_intensity(static_cast<int>(truth.at(y, x, ch)), k);
                if (in_scope) {
                    weights[i] = T(1);
                    ++counted;
                }
            }
        }
    Tensor<T> total = nll_gather(pred, bins, weights, static_cast<T>(kProbFloor));
    return scale(total, counted ? T(1) / static_cast<T>(counted) : T(0));
}

}  // namespace vad
