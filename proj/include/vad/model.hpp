#pragma once

// The inpainting network: per-frame resolution-preserving CNN encoder,
// ConvLSTM temporal aggregation, dynamic-filter attention produced by a
// meta-network, and a same-padding convolutional decoder ending in a K-way
// softmax per pixel per channel. All pixels are predicted in one pass.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vad/frame.hpp"
#include "vad/masking.hpp"
#include "vad/tensor.hpp"

namespace vad {

struct Hyper {
    int in_channels = 1;
    int hidden_ch = 32;    // C_h, encoder/ConvLSTM channel width
    int context_len = 9;   // frames of context (T-1)
    int kernel = 3;
    int bins = 256;        // K
    int enc_layers = 2;
    int dec_layers = 4;
    int meta_hidden = 32;
    int att_ch = 32;       // attention output channels
    // Ablation switches: static filters instead of the meta-network, or a
    // context-only decoder without the masked-frame/mask channels.
    bool use_attention = true;
    bool use_masked_frame = true;

    int dyn_filter_count() const { return att_ch * context_len * hidden_ch * kernel * kernel; }
    int decoder_in_channels() const {
        return att_ch + (use_masked_frame ? in_channels + 1 : 0);
    }
    bool operator==(const Hyper&) const = default;
};

template <typename T>
struct ModelParameters {
    Hyper hyper;

    std::vector<Tensor<T>> enc_w, enc_b;          // per encoder layer
    // ConvLSTM gate banks, order: input, forget, output, candidate.
    std::vector<Tensor<T>> lstm_wx, lstm_wh, lstm_b;
    Tensor<T> meta_w1, meta_b1;                   // shared meta-network trunk
    Tensor<T> meta_wf, meta_bf;                   // head emitting the filter bank
    Tensor<T> meta_wb, meta_bb;                   // head emitting the dynamic bias
    Tensor<T> att_w, att_b;                       // static bank for the no-attention variant
    std::vector<Tensor<T>> dec_w, dec_b;
    Tensor<T> head_w, head_b;                     // 1x1 projection to C*K logits

    std::vector<std::pair<std::string, Tensor<T>*>> named_tensors() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (std::size_t i = 0; i < enc_w.size(); ++i) {
            out.emplace_back("enc_w" + std::to_string(i), &enc_w[i]);
            out.emplace_back("enc_b" + std::to_string(i), &enc_b[i]);
        }
        static const char* gates[] = {"i", "f", "o", "g"};
        for (int g = 0; g < 4; ++g) {
            out.emplace_back(std::string("lstm_wx_") + gates[g], &lstm_wx[g]);
            out.emplace_back(std::string("lstm_wh_") + gates[g], &lstm_wh[g]);
            out.emplace_back(std::string("lstm_b_") + gates[g], &lstm_b[g]);
        }
        if (hyper.use_attention) {
            out.emplace_back("meta_w1", &meta_w1);
            out.emplace_back("meta_b1", &meta_b1);
            out.emplace_back("meta_wf", &meta_wf);
            out.emplace_back("meta_bf", &meta_bf);
            out.emplace_back("meta_wb", &meta_wb);
            out.emplace_back("meta_bb", &meta_bb);
        } else {
            out.emplace_back("att_w", &att_w);
            out.emplace_back("att_b", &att_b);
        }
        for (std::size_t i = 0; i < dec_w.size(); ++i) {
            out.emplace_back("dec_w" + std::to_string(i), &dec_w[i]);
            out.emplace_back("dec_b" + std::to_string(i), &dec_b[i]);
        }
        out.emplace_back("head_w", &head_w);
        out.emplace_back("head_b", &head_b);
        return out;
    }

    void set_requires_grad(bool f) {
        for (auto& [name, t] : named_tensors()) t->set_requires_grad(f);
    }
};

template <typename T>
struct ConvLstmState {
    Tensor<T> h;  // tanh-bounded, entries in (-1, 1)
    Tensor<T> c;
};

template <typename T>
struct DynamicFilters {
    Tensor<T> filters;  // [C_att, (T-1)*C_h, k, k], regenerated per input
    Tensor<T> bias;     // [C_att]
};

namespace detail {

template <typename T>
Tensor<T> gaussian(Shape shape, T stddev, std::mt19937_64& rng, bool requires_grad) {
    std::normal_distribution<double> dist(0.0, static_cast<double>(stddev));
    std::vector<T> v(shape_numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), requires_grad);
}

}  // namespace detail

// Fresh parameters: fan-in scaled Gaussians for every filter bank, zero
// biases except forget gate (+1), zero head so the initial prediction is
// exactly uniform.
template <typename T>
ModelParameters<T> init_params(const Hyper& hyper, std::mt19937_64& rng) {
    ModelParameters<T> p;
    p.hyper = hyper;
    const int ch = hyper.hidden_ch, k = hyper.kernel, cin = hyper.in_channels;
    auto conv_bank = [&](int cout, int cin_l) {
        T std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(cin_l) * k * k));
        return detail::gaussian<T>({cout, cin_l, k, k}, std, rng, true);
    };
    for (int l = 0; l < hyper.enc_layers; ++l) {
        p.enc_w.push_back(conv_bank(ch, l == 0 ? cin : ch));
        p.enc_b.push_back(Tensor<T>::zeros({ch}, true));
    }
    for (int g = 0; g < 4; ++g) {
        p.lstm_wx.push_back(conv_bank(ch, ch));
        p.lstm_wh.push_back(conv_bank(ch, ch));
        p.lstm_b.push_back(g == 1 ? Tensor<T>::full({ch}, T(1), true) : Tensor<T>::zeros({ch}, true));
    }
    const int ctx_ch = hyper.context_len * ch;
    if (hyper.use_attention) {
        p.meta_w1 = detail::gaussian<T>({hyper.meta_hidden, ctx_ch},
                                        static_cast<T>(1.0 / std::sqrt(static_cast<double>(ctx_ch))), rng, true);
        p.meta_b1 = Tensor<T>::zeros({hyper.meta_hidden}, true);
        const int nf = hyper.dyn_filter_count();
        // Scaled so the emitted filters land near the variance a fan-in
        // initialized static bank of the same shape would have.
        T stdf = static_cast<T>(1.0 / std::sqrt(static_cast<double>(hyper.meta_hidden) * ctx_ch * k * k));
        p.meta_wf = detail::gaussian<T>({nf, hyper.meta_hidden}, stdf, rng, true);
        p.meta_bf = Tensor<T>::zeros({nf}, true);
        p.meta_wb = detail::gaussian<T>({hyper.att_ch, hyper.meta_hidden},
                                        static_cast<T>(1.0 / std::sqrt(static_cast<double>(hyper.meta_hidden))),
                                        rng, true);
        p.meta_bb = Tensor<T>::zeros({hyper.att_ch}, true);
    } else {
        p.att_w = conv_bank(hyper.att_ch, ctx_ch);
        p.att_b = Tensor<T>::zeros({hyper.att_ch}, true);
    }
    for (int l = 0; l < hyper.dec_layers; ++l) {
        p.dec_w.push_back(conv_bank(ch, l == 0 ? hyper.decoder_in_channels() : ch));
        p.dec_b.push_back(Tensor<T>::zeros({ch}, true));
    }
    p.head_w = Tensor<T>::zeros({cin * hyper.bins, ch, 1, 1}, true);
    p.head_b = Tensor<T>::zeros({cin * hyper.bins}, true);
    return p;
}

// Frame intensities rescaled to [0,1] as a [C,H,W] tensor.
template <typename T>
Tensor<T> frame_to_tensor(const Frame& f) {
    std::vector<T> v(f.values.size());
    const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
    for (int c = 0; c < f.channels; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            v[c * plane + i] = static_cast<T>(f.values[i * f.channels + c]) / T(255);
    return Tensor<T>({f.channels, f.height, f.width}, std::move(v));
}

template <typename T>
Tensor<T> encode_frame(const Frame& frame, const ModelParameters<T>& p) {
    Tensor<T> x = frame_to_tensor<T>(frame);
    if (frame.channels != p.hyper.in_channels)
        throw std::invalid_argument("encode_frame: frame has " + std::to_string(frame.channels) +
                                    " channels, model expects " + std::to_string(p.hyper.in_channels));
    for (std::size_t l = 0; l < p.enc_w.size(); ++l)
        x = relu(conv2d(x, p.enc_w[l], p.enc_b[l]));
    return x;
}

template <typename T>
ConvLstmState<T> convlstm_step(const Tensor<T>& x, const ConvLstmState<T>& state, const ModelParameters<T>& p) {
    auto gate = [&](int g) {
        return add(conv2d(x, p.lstm_wx[g], p.lstm_b[g]),
                   conv2d(state.h, p.lstm_wh[g], Tensor<T>::zeros({p.hyper.hidden_ch})));
    };
    Tensor<T> i = sigmoid(gate(0));
    Tensor<T> f = sigmoid(gate(1));
    Tensor<T> o = sigmoid(gate(2));
    Tensor<T> g = tanh_op(gate(3));
    Tensor<T> c = add(mul(f, state.c), mul(i, g));
    Tensor<T> h = mul(o, tanh_op(c));
    return {h, c};
}

template <typename T>
ConvLstmState<T> zero_state(const Hyper& hyper, int height, int width) {
    return {Tensor<T>::zeros({hyper.hidden_ch, height, width}),
            Tensor<T>::zeros({hyper.hidden_ch, height, width})};
}

// Fold encoder + ConvLSTM over the context frames from a zero initial state;
// returns every per-step hidden output.
template <typename T>
std::vector<Tensor<T>> encode_context(const std::vector<Frame>& context, const ModelParameters<T>& p) {
    if (context.empty()) throw std::invalid_argument("encode_context: empty context");
    ConvLstmState<T> state = zero_state<T>(p.hyper, context[0].height, context[0].width);
    std::vector<Tensor<T>> hs;
    hs.reserve(context.size());
    for (const auto& fr : context) {
        state = convlstm_step(encode_frame(fr, p), state, p);
        hs.push_back(state.h);
    }
    return hs;
}

// Meta-network: global average pool of the concatenated hidden states feeds
// two dense layers (tanh trunk) that emit the filter bank and its bias.
template <typename T>
DynamicFilters<T> make_dynamic_filters(const std::vector<Tensor<T>>& context_hs, const ModelParameters<T>& p) {
    if (context_hs.empty()) throw std::invalid_argument("make_dynamic_filters: empty context");
    Tensor<T> pooled = global_avg_pool(concat_channels(context_hs));
    Tensor<T> hidden = tanh_op(dense(pooled, p.meta_w1, p.meta_b1));
    const int ctx_ch = static_cast<int>(context_hs.size()) * p.hyper.hidden_ch;
    Tensor<T> flat = dense(hidden, p.meta_wf, p.meta_bf);
    DynamicFilters<T> dyn;
    dyn.filters = reshape(flat, {p.hyper.att_ch, ctx_ch, p.hyper.kernel, p.hyper.kernel});
    dyn.bias = dense(hidden, p.meta_wb, p.meta_bb);
    return dyn;
}

template <typename T>
Tensor<T> apply_attention(const std::vector<Tensor<T>>& context_hs, const DynamicFilters<T>& dyn) {
    return conv2d(concat_channels(context_hs), dyn.filters, dyn.bias);
}

// Full forward pass: context aggregation, attention, decoder, categorical
// head. Output is [H,W,C,K] with each K-slice a probability distribution.
template <typename T>
Tensor<T> forward(const std::vector<Frame>& context, const MaskedFrame& masked, const ModelParameters<T>& p) {
    if (context.empty()) throw std::invalid_argument("forward: empty context");
    const Frame& f0 = context.front();
    if (masked.values.height != f0.height || masked.values.width != f0.width)
        throw std::invalid_argument("forward: masked frame " + std::to_string(masked.values.height) + "x" +
                                    std::to_string(masked.values.width) + " vs context " +
                                    std::to_string(f0.height) + "x" + std::to_string(f0.width));
    std::vector<Tensor<T>> hs = encode_context(context, p);
    Tensor<T> att;
    if (p.hyper.use_attention) {
        att = apply_attention(hs, make_dynamic_filters(hs, p));
    } else {
        att = conv2d(concat_channels(hs), p.att_w, p.att_b);
    }
    Tensor<T> x;
    if (p.hyper.use_masked_frame) {
        Tensor<T> mframe = frame_to_tensor<T>(masked.values);
        std::vector<T> ind(masked.mask.visible.size());
        for (std::size_t i = 0; i < ind.size(); ++i) ind[i] = masked.mask.visible[i] ? T(1) : T(0);
        Tensor<T> indicator({1, f0.height, f0.width}, std::move(ind));
        x = concat_channels<T>({att, mframe, indicator});
    } else {
        x = att;
    }
    for (std::size_t l = 0; l < p.dec_w.size(); ++l)
        x = relu(conv2d(x, p.dec_w[l], p.dec_b[l]));
    Tensor<T> logits = conv2d(x, p.head_w, p.head_b);
    return softmax_bins(chw_to_hwck(logits, p.hyper.in_channels, p.hyper.bins));
}

}  // namespace vad
