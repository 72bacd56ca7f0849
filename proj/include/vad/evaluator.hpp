#pragma once

// Scoring of labeled test sets, Equal Error Rate computation, and P5 loss
// map export.

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "vad/frame.hpp"
#include "vad/loss.hpp"
#include "vad/masking.hpp"
#include "vad/model.hpp"

namespace vad {

struct ScoredSequence {
    int id = 0;
    bool corrupted = false;
    CorruptionMeta meta;
    AnomalyScore score;  // of the last frame
    LossMap loss_map;
};

struct EvalConfig {
    std::uint64_t eval_seed = 1234;  // fixed so reports are stable run-to-run
    int num_masks = 1;               // scores averaged over this many masks
    Scope scope = Scope::MaskedOnly;
    int mask_period_rows = 4;
    int mask_period_cols = 5;
    int threads = 1;
};

struct EvalReport {
    double eer = 0.0;
    double threshold_at_eer = 0.0;
    int n_normal = 0;
    int n_corrupted = 0;
    Scope scope = Scope::MaskedOnly;
    std::string checkpoint_id;
};

// FPR=FNR balance point over the score threshold sweep: candidates are
// midpoints between adjacent distinct scores plus sentinels below/above all
// scores; a sequence is flagged corrupted iff score >= threshold. Exact zero
// of FPR-FNR wins (lowest such threshold); otherwise the sign change is
// linearly interpolated.
EvalReport compute_eer(const std::vector<std::pair<bool, double>>& labeled_scores);

// 8-bit P5 graymap, min-max normalized per map; constant maps export as all
// zeros.
void export_loss_map(const LossMap& map, const std::string& path);

// Mean loss over the 3x3 corrupted square in `scored` divided by the same
// region's mean in the uncorrupted twin.
double localization_check(const ScoredSequence& scored, const ScoredSequence& twin);

// Evaluation masks are a pure function of the eval seed, shared across all
// sequences, so duplicated sequences score identically.
std::vector<Mask> evaluation_masks(const EvalConfig& cfg, int height, int width);

template <typename T>
ScoredSequence score_sequence(const ModelParameters<T>& params, const LabeledSequence& seq,
                              const std::vector<Mask>& masks, const EvalConfig& cfg, int id) {
    NoGradGuard ng;
    const int t = seq.sequence.length();
    const int ctx = params.hyper.context_len;
    if (t < ctx + 1)
        throw std::invalid_argument("score: sequence length " + std::to_string(t) + " too short for context " +
                                    std::to_string(ctx));
    std::vector<Frame> context(seq.sequence.frames.end() - 1 - ctx, seq.sequence.frames.end() - 1);
    const Frame& target = seq.sequence.frames.back();
    ScoredSequence out;
    out.id = id;
    out.corrupted = seq.corrupted;
    out.meta = seq.meta;
    for (std::size_t m = 0; m < masks.size(); ++m) {
        Tensor<T> pred = forward(context, apply_mask(target, masks[m]), params);
        auto [map, score] = frame_nll(pred, target, masks[m], cfg.scope);
        if (m == 0) {
            out.loss_map = map;
            out.score = score;
        } else {
            for (std::size_t i = 0; i < map.nll.size(); ++i) out.loss_map.nll[i] += map.nll[i];
            out.score.total_nll += score.total_nll;
            out.score.mean_nll += score.mean_nll;
            out.score.pixels_counted += score.pixels_counted;
        }
    }
    const double inv = 1.0 / static_cast<double>(masks.size());
    for (auto& v : out.loss_map.nll) v *= inv;
    out.score.total_nll *= inv;
    out.score.mean_nll *= inv;
    out.score.pixels_counted = static_cast<long>(out.score.pixels_counted * inv);
    return out;
}

template <typename T>
std::vector<ScoredSequence> score_dataset(const ModelParameters<T>& params,
                                          const std::vector<LabeledSequence>& dataset, const EvalConfig& cfg) {
    std::vector<ScoredSequence> out(dataset.size());
    if (dataset.empty()) return out;
    const int h = dataset[0].sequence.frames[0].height;
    const int w = dataset[0].sequence.frames[0].width;
    const std::vector<Mask> masks = evaluation_masks(cfg, h, w);
    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < dataset.size(); ++i)
            out[i] = score_sequence(params, dataset[i], masks, cfg, static_cast<int>(i));
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < dataset.size(); i = next.fetch_add(1))
                    out[i] = score_sequence(params, dataset[i], masks, cfg, static_cast<int>(i));
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace vad
