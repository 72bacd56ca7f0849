#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "doctest.h"
#include "vad/checkpoint.hpp"
#include "vad/datagen.hpp"
#include "vad/evaluator.hpp"
#include "vad/trainer.hpp"

namespace {

// Independent exhaustive sweep over the documented candidate thresholds.
double eer_bruteforce(const std::vector<std::pair<bool, double>>& items, double* thr_out = nullptr) {
    std::vector<double> scores;
    for (auto& [c, s] : items) scores.push_back(s);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    std::vector<double> cand{scores.front() - 1.0};
    for (std::size_t i = 0; i + 1 < scores.size(); ++i) cand.push_back(0.5 * (scores[i] + scores[i + 1]));
    cand.push_back(scores.back() + 1.0);

    int nn = 0, nc = 0;
    for (auto& [c, s] : items) (c ? nc : nn)++;
    std::vector<double> fpr(cand.size()), fnr(cand.size());
    for (std::size_t i = 0; i < cand.size(); ++i) {
        int fp = 0, fn = 0;
        for (auto& [c, s] : items) {
            if (!c && s >= cand[i]) ++fp;
            if (c && s < cand[i]) ++fn;
        }
        fpr[i] = double(fp) / nn;
        fnr[i] = double(fn) / nc;
    }
    // exact balance wins, lowest threshold first
    for (std::size_t i = 0; i < cand.size(); ++i)
        if (fpr[i] == fnr[i]) {
            if (thr_out) *thr_out = cand[i];
            return fpr[i];
        }
    for (std::size_t i = 0; i + 1 < cand.size(); ++i) {
        const double d0 = fpr[i] - fnr[i], d1 = fpr[i + 1] - fnr[i + 1];
        if (d0 * d1 < 0.0) {
            const double a = d0 / (d0 - d1);
            if (thr_out) *thr_out = (1 - a) * cand[i] + a * cand[i + 1];
            return (1 - a) * 0.5 * (fpr[i] + fnr[i]) + a * 0.5 * (fpr[i + 1] + fnr[i + 1]);
        }
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < cand.size(); ++i)
        if (std::abs(fpr[i] - fnr[i]) < std::abs(fpr[best] - fnr[best])) best = i;
    if (thr_out) *thr_out = cand[best];
    return 0.5 * (fpr[best] + fnr[best]);
}

}  // namespace

TEST_CASE("perfect separation gives EER zero") {
    auto r = vad::compute_eer({{false, 0.1}, {false, 0.2}, {true, 0.8}, {true, 0.9}});
    CHECK(r.eer == doctest::Approx(0.0));
    CHECK(r.n_normal == 2);
    CHECK(r.n_corrupted == 2);
}

TEST_CASE("identical scores give chance EER") {
    auto r = vad::compute_eer({{false, 0.4}, {true, 0.4}, {false, 0.4}, {true, 0.4}});
    CHECK(r.eer == doctest::Approx(0.5));
}

TEST_CASE("fixture: EER 0.25 at threshold 0.375") {
    std::vector<std::pair<bool, double>> items{{false, 0.1}, {false, 0.2}, {false, 0.3}, {false, 0.4},
                                               {true, 0.35}, {true, 0.5}, {true, 0.6}, {true, 0.7}};
    auto r = vad::compute_eer(items);
    CHECK(r.eer == doctest::Approx(0.25));
    CHECK(r.threshold_at_eer == doctest::Approx(0.375));
}

TEST_CASE("single-class input is rejected") {
    CHECK_THROWS_AS(vad::compute_eer({{false, 0.1}, {false, 0.2}}), std::invalid_argument);
    CHECK_THROWS_AS(vad::compute_eer({{true, 0.1}}), std::invalid_argument);
}

TEST_CASE("compute_eer matches the exhaustive sweep on random score sets") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> usize(1, 100);
    std::uniform_real_distribution<double> uscore(0.0, 1.0);
    std::uniform_int_distribution<int> ubits(0, 3);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<std::pair<bool, double>> items;
        const int nn = usize(rng), nc = usize(rng);
        for (int i = 0; i < nn; ++i) items.emplace_back(false, uscore(rng));
        for (int i = 0; i < nc; ++i) items.emplace_back(true, uscore(rng) + 0.2 * ubits(rng));
        // quantize some trials to force ties
        if (trial % 3 == 0)
            for (auto& [c, s] : items) s = std::round(s * 8) / 8.0;
        double thr = 0.0;
        const double expect = eer_bruteforce(items, &thr);
        auto got = vad::compute_eer(items);
        CHECK(got.eer == doctest::Approx(expect).epsilon(1e-12));
        CHECK(got.threshold_at_eer == doctest::Approx(thr).epsilon(1e-12));
    }
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::pair<bool, double>> items;
    for (int i = 0; i < 40; ++i) items.emplace_back(false, u(rng));
    for (int i = 0; i < 40; ++i) items.emplace_back(true, u(rng) + 0.3);
    const double base = vad::compute_eer(items).eer;
    auto transformed = items;
    for (auto& [c, s] : transformed) s = std::exp(2.0 * s) - 5.0;
    CHECK(vad::compute_eer(transformed).eer == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("export_loss_map writes an exact P5 header, constant maps all zero") {
    vad::LossMap map;
    map.height = 64;
    map.width = 64;
    map.nll.assign(4096, 1.5);
    vad::export_loss_map(map, "const.pgm");
    std::ifstream in("const.pgm", std::ios::binary);
    std::string magic, dims;
    std::getline(in, magic);
    CHECK(magic == "P5");
    std::getline(in, dims);
    CHECK(dims == "64 64");
    std::getline(in, dims);
    CHECK(dims == "255");
    std::vector<char> px(4096);
    in.read(px.data(), 4096);
    CHECK(in.gcount() == 4096);
    for (char v : px) CHECK(v == 0);
    std::remove("const.pgm");
}

TEST_CASE("export_loss_map maps the maximum to 255") {
    vad::LossMap map;
    map.height = 4;
    map.width = 4;
    map.nll.assign(16, 0.25);
    map.nll[5] = 2.0;
    vad::export_loss_map(map, "peak.pgm");
    std::ifstream in("peak.pgm", std::ios::binary);
    std::string line;
    for (int i = 0; i < 3; ++i) std::getline(in, line);
    std::vector<unsigned char> px(16);
    in.read(reinterpret_cast<char*>(px.data()), 16);
    CHECK(px[5] == 255);
    CHECK(px[0] == 0);
    std::remove("peak.pgm");
}

TEST_CASE("localization_check: identical maps give ratio one, missing meta rejected") {
    vad::ScoredSequence a, b;
    a.loss_map.height = b.loss_map.height = 8;
    a.loss_map.width = b.loss_map.width = 8;
    a.loss_map.nll.assign(64, 0.5);
    b.loss_map.nll.assign(64, 0.5);
    a.meta.square_row = 4;
    a.meta.square_col = 4;
    CHECK(vad::localization_check(a, b) == doctest::Approx(1.0));

    vad::ScoredSequence no_meta = a;
    no_meta.meta = vad::CorruptionMeta{};
    CHECK_THROWS_AS(vad::localization_check(no_meta, b), std::invalid_argument);
}

TEST_CASE("score_dataset: empty input, duplicates, determinism, threads") {
    std::mt19937_64 rng(3);
    vad::Hyper hyper;
    hyper.hidden_ch = 6;
    hyper.context_len = 3;
    hyper.bins = 16;
    hyper.enc_layers = 2;
    hyper.dec_layers = 2;
    hyper.meta_hidden = 6;
    hyper.att_ch = 6;
    auto params = vad::init_params<float>(hyper, rng);
    std::normal_distribution<float> n(0.0f, 0.3f);
    for (auto& v : params.head_w.mutable_values()) v = n(rng);

    vad::EvalConfig cfg;
    cfg.mask_period_rows = 2;
    cfg.mask_period_cols = 3;
    CHECK(vad::score_dataset(params, {}, cfg).empty());

    vad::GenConfig gcfg;
    gcfg.frame_height = gcfg.frame_width = 16;
    gcfg.digits = 1;
    gcfg.digit_size = 10;
    auto data = vad::build_test_set(2, 2, 5, vad::synthetic_sprites(), gcfg);
    data.push_back(data[0]);  // duplicate
    auto scored = vad::score_dataset(params, data, cfg);
    REQUIRE(scored.size() == 5);
    CHECK(scored[4].score.mean_nll == scored[0].score.mean_nll);
    CHECK(scored[4].score.total_nll == scored[0].score.total_nll);

    auto again = vad::score_dataset(params, data, cfg);
    for (std::size_t i = 0; i < scored.size(); ++i)
        CHECK(again[i].score.mean_nll == scored[i].score.mean_nll);

    vad::EvalConfig threaded = cfg;
    threaded.threads = 3;
    auto parallel = vad::score_dataset(params, data, threaded);
    for (std::size_t i = 0; i < scored.size(); ++i)
        CHECK(parallel[i].score.mean_nll == scored[i].score.mean_nll);
}

TEST_CASE("multi-mask averaging changes the mask draw but stays deterministic") {
    std::mt19937_64 rng(4);
    vad::Hyper hyper;
    hyper.hidden_ch = 4;
    hyper.context_len = 2;
    hyper.bins = 16;
    hyper.dec_layers = 2;
    hyper.meta_hidden = 4;
    hyper.att_ch = 4;
    auto params = vad::init_params<float>(hyper, rng);
    vad::GenConfig gcfg;
    gcfg.frame_height = gcfg.frame_width = 16;
    gcfg.digits = 1;
    gcfg.digit_size = 10;
    auto data = vad::build_test_set(1, 1, 6, vad::synthetic_sprites(), gcfg);
    vad::EvalConfig cfg;
    cfg.num_masks = 4;
    auto a = vad::score_dataset(params, data, cfg);
    auto b = vad::score_dataset(params, data, cfg);
    CHECK(a[0].score.mean_nll == b[0].score.mean_nll);
    CHECK(a[1].score.mean_nll == b[1].score.mean_nll);
}
