#include "vad/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace vad {

std::vector<Mask> evaluation_masks(const EvalConfig& cfg, int height, int width) {
    std::mt19937_64 rng(cfg.eval_seed);
    std::vector<Mask> masks;
    masks.reserve(std::max(1, cfg.num_masks));
    for (int i = 0; i < std::max(1, cfg.num_masks); ++i)
        masks.push_back(grid_mask(height, width, cfg.mask_period_rows, cfg.mask_period_cols, rng));
    return masks;
}

EvalReport compute_eer(const std::vector<std::pair<bool, double>>& labeled_scores) {
    int n_normal = 0, n_corrupted = 0;
    for (const auto& [corrupted, score] : labeled_scores) (corrupted ? n_corrupted : n_normal)++;
    if (n_normal == 0 || n_corrupted == 0)
        throw std::invalid_argument("compute_eer: need at least one normal and one corrupted score");

    std::vector<double> distinct;
    distinct.reserve(labeled_scores.size());
    for (const auto& [c, s] : labeled_scores) distinct.push_back(s);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<double> thresholds;
    thresholds.push_back(distinct.front() - 1.0);  // everything flagged
    for (std::size_t i = 0; i + 1 < distinct.size(); ++i)
        thresholds.push_back((distinct[i] + distinct[i + 1]) / 2.0);
    thresholds.push_back(distinct.back() + 1.0);   // nothing flagged

    auto rates = [&](double thr) {
        int fp = 0, fn = 0;
        for (const auto& [corrupted, score] : labeled_scores) {
            const bool flagged = score >= thr;
            if (!corrupted && flagged) ++fp;
            if (corrupted && !flagged) ++fn;
        }
        return std::pair<double, double>{static_cast<double>(fp) / n_normal, static_cast<double>(fn) / n_corrupted};
    };

    EvalReport report;
    report.n_normal = n_normal;
    report.n_corrupted = n_corrupted;

    double best_abs = 2.0;
    std::size_t best_i = 0;
    std::vector<std::pair<double, double>> fr(thresholds.size());
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        fr[i] = rates(thresholds[i]);
        const double d = std::abs(fr[i].first - fr[i].second);
        if (d < best_abs - 1e-15) {  // ties break toward the lower threshold
            best_abs = d;
            best_i = i;
        }
    }
    if (best_abs == 0.0) {
        report.eer = (fr[best_i].first + fr[best_i].second) / 2.0;
        report.threshold_at_eer = thresholds[best_i];
        return report;
    }
    // Interpolate across the sign change of FPR - FNR.
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i) {
        const double d0 = fr[i].first - fr[i].second;
        const double d1 = fr[i + 1].first - fr[i + 1].second;
        if ((d0 > 0.0 && d1 < 0.0) || (d0 < 0.0 && d1 > 0.0)) {
            const double alpha = d0 / (d0 - d1);
            report.eer = (1.0 - alpha) * (fr[i].first + fr[i].second) / 2.0 +
                         alpha * (fr[i + 1].first + fr[i + 1].second) / 2.0;
            report.threshold_at_eer = (1.0 - alpha) * thresholds[i] + alpha * thresholds[i + 1];
            return report;
        }
    }
    // No crossing: scores are degenerately ordered; report the balance
    // minimum directly.
    report.eer = (fr[best_i].first + fr[best_i].second) / 2.0;
    report.threshold_at_eer = thresholds[best_i];
    return report;
}

void export_loss_map(const LossMap& map, const std::string& path) {
    for (double v : map.nll)
        if (!std::isfinite(v)) throw std::invalid_argument("export_loss_map: non-finite entry");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_loss_map: cannot open " + path + " for writing");
    double lo = map.nll.empty() ? 0.0 : map.nll[0], hi = lo;
    for (double v : map.nll) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    out << "P5\n" << map.width << ' ' << map.height << "\n255\n";
    const double range = hi - lo;
    for (double v : map.nll) {
        const int g = range > 0.0 ? static_cast<int>(std::lround((v - lo) / range * 255.0)) : 0;
        out.put(static_cast<char>(g));
    }
    if (!out) throw std::runtime_error("export_loss_map: write failed for " + path);
}

double localization_check(const ScoredSequence& scored, const ScoredSequence& twin) {
    if (scored.meta.square_row < 0 || scored.meta.square_col < 0)
        throw std::invalid_argument("localization_check: scored sequence has no spatial corruption metadata");
    auto region_mean = [&](const LossMap& map) {
        const int cy = scored.meta.square_row, cx = scored.meta.square_col;
        double sum = 0.0;
        int n = 0;
        for (int y = std::max(0, cy - 1); y <= std::min(map.height - 1, cy + 1); ++y)
            for (int x = std::max(0, cx - 1); x <= std::min(map.width - 1, cx + 1); ++x) {
                sum += map.at(y, x);
                ++n;
            }
        return sum / n;
    };
    return region_mean(scored.loss_map) / region_mean(twin.loss_map);
}

}  // namespace vad
