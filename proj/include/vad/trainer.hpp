#pragma once

// Optimizes the model on anomaly-free sequences: sliding context windows,
// a fresh grid mask per example, Adam updates, tab-separated training log.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "vad/frame.hpp"
#include "vad/loss.hpp"
#include "vad/masking.hpp"
#include "vad/model.hpp"

namespace vad {

struct TrainConfig {
    double learning_rate = 1e-3;
    double final_lr_fraction = 1.0;  // < 1 enables cosine decay toward learning_rate * fraction
    int batch_size = 8;
    int steps = 1000;
    std::uint64_t seed = 0;
    int mask_period_rows = 4;
    int mask_period_cols = 5;
    int log_interval = 50;
    int checkpoint_interval = 500;  // finite-parameter assertion cadence
    Scope loss_scope = Scope::All;
    Hyper hyper;

    void validate() const {
        if (learning_rate < 0) throw std::invalid_argument("train: negative learning rate");
        if (final_lr_fraction < 0 || final_lr_fraction > 1)
            throw std::invalid_argument("train: final_lr_fraction outside [0,1]");
        if (batch_size < 1 || steps < 0 || log_interval < 1 || checkpoint_interval < 1)
            throw std::invalid_argument("train: nonpositive batch/step/interval field");
        const int k = hyper.bins;
        if (k != 32 && k != 64 && k != 128 && k != 256)
            throw std::invalid_argument("train: bin count K=" + std::to_string(k) + " not in {32,64,128,256}");
    }
};

struct TrainLogRecord {
    long step = 0;
    double mean_nll = 0.0;  // per counted pixel-channel term
    double wall_ms = 0.0;
    double grad_norm = 0.0;
};

// Adam with bias correction; moments live alongside each named tensor.
template <typename T>
class AdamOptimizer {
public:
    AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<std::pair<std::string, Tensor<T>*>>& named) {
        if (m_.empty()) {
            for (auto& [name, t] : named) {
                m_.emplace_back(t->numel(), T(0));
                v_.emplace_back(t->numel(), T(0));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < named.size(); ++i) {
            Tensor<T>& p = *named[i].second;
            if (p.grad().empty()) continue;
            auto& vals = p.mutable_values();
            const auto& g = p.grad();
            for (std::size_t j = 0; j < vals.size(); ++j) {
                m_[i][j] = static_cast<T>(beta1_ * m_[i][j] + (1.0 - beta1_) * g[j]);
                v_[i][j] = static_cast<T>(beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j]);
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                vals[j] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

template <typename T>
double grad_norm(std::vector<std::pair<std::string, Tensor<T>*>>& named) {
    double s = 0.0;
    for (auto& [name, t] : named)
        for (T g : t->grad()) s += static_cast<double>(g) * g;
    return std::sqrt(s);
}

template <typename T>
void assert_finite(std::vector<std::pair<std::string, Tensor<T>*>>& named, long step) {
    for (auto& [name, t] : named)
        for (T v : t->values())
            if (!std::isfinite(static_cast<double>(v)))
                throw std::runtime_error("train: tensor '" + name + "' went non-finite at step " +
                                         std::to_string(step));
}

template <typename T>
std::pair<ModelParameters<T>, std::vector<TrainLogRecord>> train(const TrainConfig& config,
                                                                 const std::vector<LabeledSequence>& dataset,
                                                                 std::ostream* log_stream = nullptr) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& s : dataset)
        if (s.corrupted) throw std::invalid_argument("train: dataset contains a corrupted-labeled sequence");
    const Hyper& hyper = config.hyper;
    const int t_total = dataset[0].sequence.length();
    if (t_total < hyper.context_len + 1)
        throw std::invalid_argument("train: sequences of length " + std::to_string(t_total) +
                                    " cannot hold a " + std::to_string(hyper.context_len) + "-frame context window");
    const int h = dataset[0].sequence.frames[0].height;
    const int w = dataset[0].sequence.frames[0].width;

    std::mt19937_64 rng(config.seed);
    ModelParameters<T> params = init_params<T>(hyper, rng);
    auto named = params.named_tensors();
    AdamOptimizer<T> opt(config.learning_rate);
    std::vector<TrainLogRecord> log;
    std::uniform_int_distribution<std::size_t> pick_seq(0, dataset.size() - 1);
    std::uniform_int_distribution<int> pick_start(0, t_total - hyper.context_len - 1);

    const auto t0 = std::chrono::steady_clock::now();
    for (long step = 1; step <= config.steps; ++step) {
        if (config.final_lr_fraction < 1.0) {
            const double progress = static_cast<double>(step - 1) / std::max(1L, static_cast<long>(config.steps) - 1);
            const double frac =
                config.final_lr_fraction + (1.0 - config.final_lr_fraction) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
            opt.set_lr(config.learning_rate * frac);
        }
        Tensor<T> batch_loss;
        for (int b = 0; b < config.batch_size; ++b) {
            const Sequence& seq = dataset[pick_seq(rng)].sequence;
            const int start = pick_start(rng);
            std::vector<Frame> context(seq.frames.begin() + start, seq.frames.begin() + start + hyper.context_len);
            const Frame& target = seq.frames[start + hyper.context_len];
            Mask mask = grid_mask(h, w, config.mask_period_rows, config.mask_period_cols, rng);
            Tensor<T> pred = forward(context, apply_mask(target, mask), params);
            Tensor<T> loss = nll_loss(pred, target, mask, config.loss_scope);
            batch_loss = b == 0 ? loss : add(batch_loss, loss);
        }
        batch_loss = scale(batch_loss, T(1) / static_cast<T>(config.batch_size));
        const double loss_value = static_cast<double>(batch_loss.item());
        backward(batch_loss);
        const double gnorm = grad_norm(named);
        opt.step(named);
        for (auto& [name, t] : named) t->zero_grad();

        if (step % config.checkpoint_interval == 0) assert_finite(named, step);
        if (step % config.log_interval == 0 || step == config.steps) {
            TrainLogRecord rec;
            rec.step = step;
            rec.mean_nll = loss_value;
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            rec.grad_norm = gnorm;
            log.push_back(rec);
            if (log_stream)
                (*log_stream) << rec.step << '\t' << rec.mean_nll << '\t' << rec.wall_ms << '\t' << rec.grad_norm
                              << '\n';
        }
    }
    assert_finite(named, config.steps);
    return {std::move(params), std::move(log)};
}

}  // namespace vad
