#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vad/datagen.hpp"
#include "vad/loss.hpp"
#include "vad/model.hpp"
#include "vad/trainer.hpp"

using vad::Tensor;

namespace {

vad::Hyper tiny_hyper() {
    vad::Hyper h;
    h.in_channels = 1;
    h.hidden_ch = 3;
    h.context_len = 2;
    h.bins = 8;
    h.enc_layers = 2;
    h.dec_layers = 2;
    h.meta_hidden = 4;
    h.att_ch = 3;
    return h;
}

vad::Frame random_frame(int h, int w, std::mt19937_64& rng) {
    vad::Frame f(h, w, 1);
    std::uniform_int_distribution<int> u(0, 255);
    for (auto& v : f.values) v = static_cast<std::uint8_t>(u(rng));
    return f;
}

// A briefly trained, non-degenerate model on 12x12 single-digit data.
struct TrainedFixture {
    vad::ModelParameters<double> params;
    std::vector<vad::LabeledSequence> data;

    TrainedFixture() {
        vad::GenConfig gcfg;
        gcfg.frame_height = gcfg.frame_width = 12;
        gcfg.digits = 1;
        gcfg.digit_size = 6;
        data = vad::build_train_set(6, 3, vad::synthetic_sprites(), gcfg);
        vad::TrainConfig tcfg;
        tcfg.hyper = tiny_hyper();
        tcfg.hyper.bins = 32;
        tcfg.steps = 40;
        tcfg.batch_size = 2;
        tcfg.mask_period_rows = 2;
        tcfg.mask_period_cols = 2;
        tcfg.seed = 11;
        params = vad::train<double>(tcfg, data).first;
    }
};

TrainedFixture& trained() {
    static TrainedFixture fixture;
    return fixture;
}

}  // namespace

TEST_CASE("encode_frame preserves resolution and zero maps to zero") {
    std::mt19937_64 rng(1);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    auto out = vad::encode_frame(random_frame(9, 7, rng), params);
    CHECK(out.shape() == vad::Shape{3, 9, 7});

    for (auto& w : params.enc_w) std::fill(w.mutable_values().begin(), w.mutable_values().end(), 0.0);
    auto zero = vad::encode_frame(vad::Frame(9, 7, 1), params);
    for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("encode_frame matches hand-composed conv/pointwise calls") {
    std::mt19937_64 rng(2);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    vad::Frame f = random_frame(6, 6, rng);
    auto got = vad::encode_frame(f, params);
    auto x = vad::frame_to_tensor<double>(f);
    x = vad::relu(vad::conv2d(x, params.enc_w[0], params.enc_b[0]));
    x = vad::relu(vad::conv2d(x, params.enc_w[1], params.enc_b[1]));
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(got.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("convlstm_step: zero everything yields zero state") {
    auto hyper = tiny_hyper();
    std::mt19937_64 rng(3);
    auto params = vad::init_params<double>(hyper, rng);
    for (int g = 0; g < 4; ++g) {
        std::fill(params.lstm_wx[g].mutable_values().begin(), params.lstm_wx[g].mutable_values().end(), 0.0);
        std::fill(params.lstm_wh[g].mutable_values().begin(), params.lstm_wh[g].mutable_values().end(), 0.0);
        std::fill(params.lstm_b[g].mutable_values().begin(), params.lstm_b[g].mutable_values().end(), 0.0);
    }
    auto state = vad::zero_state<double>(hyper, 5, 5);
    auto next = vad::convlstm_step(Tensor<double>::zeros({3, 5, 5}), state, params);
    for (double v : next.h.values()) CHECK(v == 0.0);
    for (double v : next.c.values()) CHECK(v == 0.0);
}

TEST_CASE("convlstm_step output stays inside (-1, 1)") {
    std::mt19937_64 rng(4);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    auto state = vad::zero_state<double>(tiny_hyper(), 6, 6);
    Tensor<double> x({3, 6, 6}, oracle::random_values(108, rng, 3.0));
    for (int step = 0; step < 4; ++step) {
        auto next = vad::convlstm_step(x, state, params);
        for (double v : next.h.values()) CHECK(std::abs(v) < 1.0);
        state = next;
    }
}

TEST_CASE("convlstm_step gradients vs finite differences on every gate filter") {
    std::mt19937_64 rng(5);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    Tensor<double> x({3, 4, 4}, oracle::random_values(48, rng, 0.5), true);
    auto loss_fn = [&] {
        auto state = vad::zero_state<double>(tiny_hyper(), 4, 4);
        auto next = vad::convlstm_step(x, state, params);
        return vad::sum(vad::mul(next.h, next.h));
    };
    std::vector<Tensor<double>*> checked{&x};
    for (int g = 0; g < 4; ++g) {
        checked.push_back(&params.lstm_wx[g]);
        checked.push_back(&params.lstm_wh[g]);
        checked.push_back(&params.lstm_b[g]);
    }
    auto r = oracle::check_gradients(checked, loss_fn, rng, 6);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("encode_context emits one h per frame; length one equals a single step") {
    std::mt19937_64 rng(6);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    std::vector<vad::Frame> context;
    for (int i = 0; i < 4; ++i) context.push_back(random_frame(8, 8, rng));
    auto hs = vad::encode_context(context, params);
    CHECK(hs.size() == 4);

    auto single = vad::encode_context({context[0]}, params);
    auto direct = vad::convlstm_step(vad::encode_frame(context[0], params),
                                     vad::zero_state<double>(tiny_hyper(), 8, 8), params);
    for (std::size_t i = 0; i < direct.h.numel(); ++i)
        CHECK(single[0].values()[i] == doctest::Approx(direct.h.values()[i]));

    CHECK_THROWS_AS(vad::encode_context({}, params), std::invalid_argument);
}

TEST_CASE("permuting context frames changes the trained model's final h") {
    auto& fx = trained();
    const auto& frames = fx.data[0].sequence.frames;
    std::vector<vad::Frame> ctx{frames[0], frames[4]};
    std::vector<vad::Frame> swapped{frames[4], frames[0]};
    auto a = vad::encode_context(ctx, fx.params);
    auto b = vad::encode_context(swapped, fx.params);
    double diff = 0.0;
    for (std::size_t i = 0; i < a.back().numel(); ++i)
        diff = std::max(diff, std::abs(a.back().values()[i] - b.back().values()[i]));
    CHECK(diff > 1e-9);
}

TEST_CASE("make_dynamic_filters: shape law and zero meta-network") {
    std::mt19937_64 rng(7);
    for (int ctx_len = 1; ctx_len <= 3; ++ctx_len) {
        auto hyper = tiny_hyper();
        hyper.context_len = ctx_len;
        auto params = vad::init_params<double>(hyper, rng);
        std::vector<Tensor<double>> hs;
        for (int i = 0; i < ctx_len; ++i)
            hs.push_back(Tensor<double>({3, 5, 5}, oracle::random_values(75, rng)));
        auto dyn = vad::make_dynamic_filters(hs, params);
        CHECK(dyn.filters.shape() == vad::Shape{3, ctx_len * 3, 3, 3});
        CHECK(dyn.bias.shape() == vad::Shape{3});

        for (auto* t : {&params.meta_w1, &params.meta_b1, &params.meta_wf, &params.meta_bf, &params.meta_wb,
                        &params.meta_bb})
            std::fill(t->mutable_values().begin(), t->mutable_values().end(), 0.0);
        auto zero = vad::make_dynamic_filters(hs, params);
        for (double v : zero.filters.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("trained meta-network emits input-dependent filters") {
    auto& fx = trained();
    const auto& frames = fx.data[0].sequence.frames;
    auto hs1 = vad::encode_context({frames[0], frames[1]}, fx.params);
    auto hs2 = vad::encode_context({frames[8], frames[9]}, fx.params);
    auto d1 = vad::make_dynamic_filters(hs1, fx.params);
    auto d2 = vad::make_dynamic_filters(hs2, fx.params);
    double diff = 0.0;
    for (std::size_t i = 0; i < d1.filters.numel(); ++i)
        diff = std::max(diff, std::abs(d1.filters.values()[i] - d2.filters.values()[i]));
    CHECK(diff > 1e-12);
}

TEST_CASE("apply_attention: zero filters broadcast the bias, random matches oracle") {
    std::mt19937_64 rng(8);
    std::vector<Tensor<double>> hs{Tensor<double>({2, 4, 4}, oracle::random_values(32, rng)),
                                   Tensor<double>({2, 4, 4}, oracle::random_values(32, rng))};
    vad::DynamicFilters<double> dyn;
    dyn.filters = Tensor<double>::zeros({3, 4, 3, 3});
    dyn.bias = Tensor<double>({3}, {0.5, -1.0, 2.0});
    auto out = vad::apply_attention(hs, dyn);
    CHECK(out.shape() == vad::Shape{3, 4, 4});
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 16; ++i) CHECK(out.values()[c * 16 + i] == dyn.bias.values()[c]);

    dyn.filters = Tensor<double>({3, 4, 3, 3}, oracle::random_values(108, rng));
    out = vad::apply_attention(hs, dyn);
    auto cat = vad::concat_channels(hs);
    auto expect = oracle::conv2d_direct(cat.values(), 4, 4, 4, dyn.filters.values(), 3, 3, 3, dyn.bias.values());
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(out.values()[i] == doctest::Approx(expect[i]));
}

TEST_CASE("apply_attention 1x1 identity filters select a channel") {
    std::mt19937_64 rng(9);
    std::vector<Tensor<double>> hs{Tensor<double>({2, 3, 3}, oracle::random_values(18, rng))};
    vad::DynamicFilters<double> dyn;
    dyn.filters = Tensor<double>::zeros({2, 2, 1, 1});
    dyn.filters.mutable_values()[0] = 1.0;  // out0 <- in0
    dyn.filters.mutable_values()[3] = 1.0;  // out1 <- in1
    dyn.bias = Tensor<double>::zeros({2});
    auto out = vad::apply_attention(hs, dyn);
    for (std::size_t i = 0; i < 18; ++i) CHECK(out.values()[i] == doctest::Approx(hs[0].values()[i]));
}

TEST_CASE("forward with fresh parameters is exactly uniform") {
    std::mt19937_64 rng(10);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    std::vector<vad::Frame> context{random_frame(8, 8, rng), random_frame(8, 8, rng)};
    auto mask = vad::grid_mask(8, 8, 2, 2, rng);
    auto pred = vad::forward(context, vad::apply_mask(random_frame(8, 8, rng), mask), params);
    CHECK(pred.shape() == vad::Shape{8, 8, 1, 8});
    for (double p : pred.values()) CHECK(p == doctest::Approx(1.0 / 8).epsilon(1e-12));
}

TEST_CASE("forward probabilities sum to one for random weights") {
    std::mt19937_64 rng(11);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    auto vals = oracle::random_values(params.head_w.numel(), rng, 0.3);
    params.head_w.mutable_values().assign(vals.begin(), vals.end());
    std::vector<vad::Frame> context{random_frame(6, 6, rng), random_frame(6, 6, rng)};
    auto mask = vad::grid_mask(6, 6, 2, 3, rng);
    auto pred = vad::forward(context, vad::apply_mask(random_frame(6, 6, rng), mask), params);
    const int k = pred.shape()[3];
    for (std::size_t row = 0; row < pred.numel() / k; ++row) {
        double s = 0.0;
        for (int b = 0; b < k; ++b) s += pred.values()[row * k + b];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("forward equals the hand-composed pipeline of its stages") {
    std::mt19937_64 rng(12);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    auto vals = oracle::random_values(params.head_w.numel(), rng, 0.3);
    params.head_w.mutable_values().assign(vals.begin(), vals.end());
    std::vector<vad::Frame> context{random_frame(6, 6, rng), random_frame(6, 6, rng)};
    auto mask = vad::grid_mask(6, 6, 2, 3, rng);
    auto masked = vad::apply_mask(random_frame(6, 6, rng), mask);
    auto got = vad::forward(context, masked, params);

    auto hs = vad::encode_context(context, params);
    auto att = vad::apply_attention(hs, vad::make_dynamic_filters(hs, params));
    std::vector<double> ind(36);
    for (int i = 0; i < 36; ++i) ind[i] = mask.visible[i] ? 1.0 : 0.0;
    auto x = vad::concat_channels<double>({att, vad::frame_to_tensor<double>(masked.values),
                                           Tensor<double>({1, 6, 6}, ind)});
    for (std::size_t l = 0; l < params.dec_w.size(); ++l)
        x = vad::relu(vad::conv2d(x, params.dec_w[l], params.dec_b[l]));
    auto expect = vad::softmax_bins(vad::chw_to_hwck(vad::conv2d(x, params.head_w, params.head_b), 1, 8));
    for (std::size_t i = 0; i < expect.numel(); ++i)
        CHECK(got.values()[i] == doctest::Approx(expect.values()[i]).epsilon(1e-12));
}

TEST_CASE("forward rejects mismatched masked-frame dimensions") {
    std::mt19937_64 rng(13);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    std::vector<vad::Frame> context{random_frame(8, 8, rng), random_frame(8, 8, rng)};
    auto mask = vad::grid_mask(6, 6, 2, 2, rng);
    CHECK_THROWS_AS(vad::forward(context, vad::apply_mask(random_frame(6, 6, rng), mask), params),
                    std::invalid_argument);
}

TEST_CASE("end-to-end gradients: loss wrt sampled parameters of every collection") {
    std::mt19937_64 rng(14);
    auto params = vad::init_params<double>(tiny_hyper(), rng);
    auto vals = oracle::random_values(params.head_w.numel(), rng, 0.2);
    params.head_w.mutable_values().assign(vals.begin(), vals.end());
    std::vector<vad::Frame> context{random_frame(5, 5, rng), random_frame(5, 5, rng)};
    vad::Frame target = random_frame(5, 5, rng);
    auto mask = vad::grid_mask(5, 5, 2, 2, rng);
    auto masked = vad::apply_mask(target, mask);
    auto loss_fn = [&] {
        return vad::nll_loss(vad::forward(context, masked, params), target, mask, vad::Scope::All);
    };
    std::vector<Tensor<double>*> checked;
    for (auto& [name, t] : params.named_tensors()) checked.push_back(t);
    auto r = oracle::check_gradients(checked, loss_fn, rng, 5);
    CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("no-attention and no-masked-frame variants forward correctly") {
    std::mt19937_64 rng(15);
    for (auto [att, mf] : {std::pair{false, true}, std::pair{true, false}, std::pair{false, false}}) {
        auto hyper = tiny_hyper();
        hyper.use_attention = att;
        hyper.use_masked_frame = mf;
        auto params = vad::init_params<double>(hyper, rng);
        std::vector<vad::Frame> context{random_frame(6, 6, rng), random_frame(6, 6, rng)};
        auto mask = vad::grid_mask(6, 6, 2, 2, rng);
        auto pred = vad::forward(context, vad::apply_mask(random_frame(6, 6, rng), mask), params);
        CHECK(pred.shape() == vad::Shape{6, 6, 1, 8});
        for (double p : pred.values()) CHECK(p == doctest::Approx(1.0 / 8));
    }
}
