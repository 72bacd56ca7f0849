#pragma once

// Dense row-major tensors with reverse-mode differentiation.
// Only the operations the inpainting model needs are provided; shapes are
// checked eagerly and violations throw std::invalid_argument naming both
// sides of the mismatch.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace vad {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension " + std::to_string(d));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

// When false, ops do not record parents or backward closures. Used for
// inference-only forwards (evaluation, scoring).
inline bool& grad_enabled() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_enabled()) { grad_enabled() = false; }
    ~NoGradGuard() { grad_enabled() = prev; }
};

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;  // sized lazily on first accumulation
    bool requires_grad = false;
    // Replay record: parents in application order plus the closure that
    // pushes this node's grad back to them.
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void accumulate(std::size_t i, T v) {
        if (grad.empty()) grad.assign(values.size(), T(0));
        grad[i] += v;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), T(0));
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<TensorNode<T>>()) {
        if (shape_numel(shape) != values.size())
            throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                        std::to_string(values.size()) + " values");
        node_->shape = std::move(shape);
        node_->values = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<T> v(shape_numel(shape), T(0));
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }
    static Tensor full(Shape shape, T fill, bool requires_grad = false) {
        std::vector<T> v(shape_numel(shape), fill);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }
    static Tensor scalar(T v) { return Tensor({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->values.size(); }
    const std::vector<T>& values() const { return node_->values; }
    std::vector<T>& mutable_values() { return node_->values; }
    const std::vector<T>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool f) { node_->requires_grad = f; }
    void zero_grad() { node_->grad.assign(node_->values.size(), T(0)); }
    T item() const {
        if (numel() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(numel()) + " elements");
        return node_->values[0];
    }

    std::shared_ptr<TensorNode<T>> node() const { return node_; }

    // Builds `out` as a child of `inputs` with the given backward closure.
    // The closure reads out.grad and accumulates into the parents.
    static Tensor make_op(Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                          std::function<void(TensorNode<T>&)> backward) {
        Tensor out(std::move(shape), std::move(values));
        bool needs = false;
        for (const auto& in : inputs) needs = needs || in.node_->requires_grad;
        if (needs && grad_enabled()) {
            out.node_->requires_grad = true;
            out.node_->parents.reserve(inputs.size());
            for (auto& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backward_fn = std::move(backward);
        }
        return out;
    }

private:
    std::shared_ptr<TensorNode<T>> node_;
};

namespace detail {

template <typename T>
void topo_visit(const std::shared_ptr<TensorNode<T>>& n,
                std::vector<std::shared_ptr<TensorNode<T>>>& order,
                std::unordered_set<TensorNode<T>*>& seen) {
    // Iterative DFS; graphs can be deep (per-step LSTM chains).
    struct Item {
        std::shared_ptr<TensorNode<T>> node;
        std::size_t next_parent;
    };
    std::vector<Item> stack;
    stack.push_back({n, 0});
    while (!stack.empty()) {
        Item& top = stack.back();
        if (top.next_parent == 0) {
            if (!seen.insert(top.node.get()).second) {
                stack.pop_back();
                continue;
            }
        }
        if (top.next_parent < top.node->parents.size()) {
            auto child = top.node->parents[top.next_parent++];
            stack.push_back({child, 0});
        } else {
            order.push_back(top.node);
            stack.pop_back();
        }
    }
}

}  // namespace detail

// Reverse-mode pass from a scalar root. Gradients accumulate additively on
// every requires_grad ancestor; the recorded graph is released afterwards.
template <typename T>
void backward(Tensor<T> root) {
    if (root.numel() != 1)
        throw std::invalid_argument("backward: root must be scalar, got shape " + shape_str(root.shape()));
    std::vector<std::shared_ptr<TensorNode<T>>> order;
    std::unordered_set<TensorNode<T>*> seen;
    detail::topo_visit(root.node(), order, seen);
    root.node()->ensure_grad();
    root.node()->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        auto& n = **it;
        if (n.backward_fn && !n.grad.empty()) n.backward_fn(n);
    }
    for (auto& n : order) {
        n->parents.clear();
        n->backward_fn = nullptr;
    }
}

// ---- elementwise ----

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] + b.values()[i];
    return Tensor<T>::make_op(a.shape(), std::move(v), {a, b}, [](TensorNode<T>& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            out.parents[0]->accumulate(i, out.grad[i]);
            out.parents[1]->accumulate(i, out.grad[i]);
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * b.values()[i];
    return Tensor<T>::make_op(a.shape(), std::move(v), {a, b}, [](TensorNode<T>& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            out.parents[0]->accumulate(i, out.grad[i] * out.parents[1]->values[i]);
            out.parents[1]->accumulate(i, out.grad[i] * out.parents[0]->values[i]);
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    std::vector<T> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] * s;
    return Tensor<T>::make_op(a.shape(), std::move(v), {a}, [s](TensorNode<T>& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.parents[0]->accumulate(i, out.grad[i] * s);
    });
}

enum class Pointwise { Sigmoid, Tanh, Relu };

template <typename T>
Tensor<T> pointwise(const Tensor<T>& a, Pointwise kind) {
    std::vector<T> v(a.numel());
    switch (kind) {
        case Pointwise::Sigmoid:
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = T(1) / (T(1) + std::exp(-a.values()[i]));
            break;
        case Pointwise::Tanh:
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.values()[i]);
            break;
        case Pointwise::Relu:
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.values()[i] > T(0) ? a.values()[i] : T(0);
            break;
    }
    return Tensor<T>::make_op(a.shape(), std::move(v), {a}, [kind](TensorNode<T>& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            T y = out.values[i];
            T d;
            switch (kind) {
                case Pointwise::Sigmoid: d = y * (T(1) - y); break;
                case Pointwise::Tanh:    d = T(1) - y * y; break;
                default:                 d = y > T(0) ? T(1) : T(0); break;
            }
            out.parents[0]->accumulate(i, out.grad[i] * d);
        }
    });
}

template <typename T> Tensor<T> sigmoid(const Tensor<T>& a) { return pointwise(a, Pointwise::Sigmoid); }
template <typename T> Tensor<T> tanh_op(const Tensor<T>& a) { return pointwise(a, Pointwise::Tanh); }
template <typename T> Tensor<T> relu(const Tensor<T>& a) { return pointwise(a, Pointwise::Relu); }

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T s = std::accumulate(a.values().begin(), a.values().end(), T(0));
    return Tensor<T>::make_op({1}, {s}, {a}, [](TensorNode<T>& out) {
        T g = out.grad[0];
        for (std::size_t i = 0; i < out.parents[0]->values.size(); ++i) out.parents[0]->accumulate(i, g);
    });
}

// ---- shape ops ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
    if (shape_numel(shape) != a.numel())
        throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape) +
                                    " changes element count");
    std::vector<T> v = a.values();
    return Tensor<T>::make_op(std::move(shape), std::move(v), {a}, [](TensorNode<T>& out) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) out.parents[0]->accumulate(i, out.grad[i]);
    });
}

// Channel concatenation of [C_i,H,W] tensors; gradient splits back per input.
template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: empty input list");
    for (const auto& p : parts)
        if (p.shape().size() != 3)
            throw std::invalid_argument("concat_channels: expected rank-3 tensor, got " + shape_str(p.shape()));
    int h = parts[0].shape()[1], w = parts[0].shape()[2];
    int ctot = 0;
    for (const auto& p : parts) {
        if (p.shape()[1] != h || p.shape()[2] != w)
            throw std::invalid_argument("concat_channels: spatial mismatch " + shape_str(parts[0].shape()) +
                                        " vs " + shape_str(p.shape()));
        ctot += p.shape()[0];
    }
    std::vector<T> v;
    v.reserve(static_cast<std::size_t>(ctot) * h * w);
    for (const auto& p : parts) v.insert(v.end(), p.values().begin(), p.values().end());
    return Tensor<T>::make_op({ctot, h, w}, std::move(v), parts, [](TensorNode<T>& out) {
        std::size_t off = 0;
        for (auto& parent : out.parents) {
            for (std::size_t i = 0; i < parent->values.size(); ++i) parent->accumulate(i, out.grad[off + i]);
            off += parent->values.size();
        }
    });
}

// ---- convolution ----

// Same-padding 2D convolution: input [C_in,H,W], filters [C_out,C_in,kH,kW],
// bias [C_out] -> [C_out,H,W]. Zero padding at the borders; kernel dims odd.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& filters, const Tensor<T>& bias) {
    const Shape& is = input.shape();
    const Shape& fs = filters.shape();
    if (is.size() != 3 || fs.size() != 4 || bias.shape().size() != 1)
        throw std::invalid_argument("conv2d: ranks must be 3/4/1, got " + shape_str(is) + "/" + shape_str(fs) +
                                    "/" + shape_str(bias.shape()));
    const int cin = is[0], h = is[1], w = is[2];
    const int cout = fs[0], kh = fs[2], kw = fs[3];
    if (fs[1] != cin)
        throw std::invalid_argument("conv2d: input channels " + shape_str(is) + " vs filters " + shape_str(fs));
    if (bias.shape()[0] != cout)
        throw std::invalid_argument("conv2d: bias " + shape_str(bias.shape()) + " vs filters " + shape_str(fs));
    if (kh % 2 == 0 || kw % 2 == 0)
        throw std::invalid_argument("conv2d: kernel dims must be odd, got " + shape_str(fs));
    const int ph = kh / 2, pw = kw / 2;

    std::vector<T> out(static_cast<std::size_t>(cout) * h * w);
    const T* x = input.values().data();
    const T* f = filters.values().data();
    for (int co = 0; co < cout; ++co) {
        T* o = out.data() + static_cast<std::size_t>(co) * h * w;
        std::fill(o, o + static_cast<std::size_t>(h) * w, bias.values()[co]);
        for (int ci = 0; ci < cin; ++ci) {
            const T* xc = x + static_cast<std::size_t>(ci) * h * w;
            for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx) {
                    const T wgt = f[((static_cast<std::size_t>(co) * cin + ci) * kh + dy) * kw + dx];
                    if (wgt == T(0)) continue;
                    const int oy0 = std::max(0, ph - dy), oy1 = std::min(h, h + ph - dy);
                    const int ox0 = std::max(0, pw - dx), ox1 = std::min(w, w + pw - dx);
                    for (int oy = oy0; oy < oy1; ++oy) {
                        const T* xr = xc + static_cast<std::size_t>(oy + dy - ph) * w + (ox0 + dx - pw);
                        T* orow = o + static_cast<std::size_t>(oy) * w + ox0;
                        for (int ox = 0; ox < ox1 - ox0; ++ox) orow[ox] += wgt * xr[ox];
                    }
                }
            }
        }
    }

    auto bwd = [cin, h, w, cout, kh, kw, ph, pw](TensorNode<T>& node) {
        auto& in = *node.parents[0];
        auto& flt = *node.parents[1];
        auto& bs = *node.parents[2];
        in.ensure_grad();
        flt.ensure_grad();
        bs.ensure_grad();
        const T* g = node.grad.data();
        const T* x = in.values.data();
        const T* f = flt.values.data();
        for (int co = 0; co < cout; ++co) {
            const T* gc = g + static_cast<std::size_t>(co) * h * w;
            T bsum = T(0);
            for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) bsum += gc[i];
            bs.grad[co] += bsum;
            for (int ci = 0; ci < cin; ++ci) {
                const T* xc = x + static_cast<std::size_t>(ci) * h * w;
                T* xg = in.grad.data() + static_cast<std::size_t>(ci) * h * w;
                for (int dy = 0; dy < kh; ++dy) {
                    for (int dx = 0; dx < kw; ++dx) {
                        const std::size_t fidx = ((static_cast<std::size_t>(co) * cin + ci) * kh + dy) * kw + dx;
                        const T wgt = f[fidx];
                        T fsum = T(0);
                        const int oy0 = std::max(0, ph - dy), oy1 = std::min(h, h + ph - dy);
                        const int ox0 = std::max(0, pw - dx), ox1 = std::min(w, w + pw - dx);
                        for (int oy = oy0; oy < oy1; ++oy) {
                            const std::size_t xoff = static_cast<std::size_t>(oy + dy - ph) * w + (ox0 + dx - pw);
                            const T* grow = gc + static_cast<std::size_t>(oy) * w + ox0;
                            const T* xrow = xc + xoff;
                            T* xgrow = xg + xoff;
                            for (int ox = 0; ox < ox1 - ox0; ++ox) {
                                fsum += grow[ox] * xrow[ox];
                                xgrow[ox] += wgt * grow[ox];
                            }
                        }
                        flt.grad[fidx] += fsum;
                    }
                }
            }
        }
    };
    return Tensor<T>::make_op({cout, h, w}, std::move(out), {input, filters, bias}, bwd);
}

// ---- dense / pooling ----

// y = W x + b with W [M,N], x [N], b [M].
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
    if (x.shape().size() != 1 || weight.shape().size() != 2 || bias.shape().size() != 1)
        throw std::invalid_argument("dense: ranks must be 1/2/1");
    const int n = x.shape()[0], m = weight.shape()[0];
    if (weight.shape()[1] != n || bias.shape()[0] != m)
        throw std::invalid_argument("dense: weight " + shape_str(weight.shape()) + " vs x " + shape_str(x.shape()) +
                                    " vs bias " + shape_str(bias.shape()));
    std::vector<T> v(m);
    for (int i = 0; i < m; ++i) {
        T s = bias.values()[i];
        const T* wr = weight.values().data() + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) s += wr[j] * x.values()[j];
        v[i] = s;
    }
    return Tensor<T>::make_op({m}, std::move(v), {x, weight, bias}, [n, m](TensorNode<T>& out) {
        auto& xv = *out.parents[0];
        auto& wv = *out.parents[1];
        auto& bv = *out.parents[2];
        xv.ensure_grad();
        wv.ensure_grad();
        bv.ensure_grad();
        for (int i = 0; i < m; ++i) {
            const T g = out.grad[i];
            if (g == T(0)) continue;
            bv.grad[i] += g;
            const T* wr = wv.values.data() + static_cast<std::size_t>(i) * n;
            T* wg = wv.grad.data() + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                xv.grad[j] += g * wr[j];
                wg[j] += g * xv.values[j];
            }
        }
    });
}

// [C,H,W] -> [C]: mean over the spatial plane.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& a) {
    if (a.shape().size() != 3) throw std::invalid_argument("global_avg_pool: expected rank 3, got " + shape_str(a.shape()));
    const int c = a.shape()[0];
    const std::size_t plane = static_cast<std::size_t>(a.shape()[1]) * a.shape()[2];
    std::vector<T> v(c);
    for (int i = 0; i < c; ++i) {
        const T* p = a.values().data() + i * plane;
        T s = T(0);
        for (std::size_t j = 0; j < plane; ++j) s += p[j];
        v[i] = s / static_cast<T>(plane);
    }
    return Tensor<T>::make_op({c}, std::move(v), {a}, [c, plane](TensorNode<T>& out) {
        auto& in = *out.parents[0];
        in.ensure_grad();
        for (int i = 0; i < c; ++i) {
            const T g = out.grad[i] / static_cast<T>(plane);
            T* gp = in.grad.data() + i * plane;
            for (std::size_t j = 0; j < plane; ++j) gp[j] += g;
        }
    });
}

// ---- softmax / categorical heads ----

// Softmax along the last axis, max-subtracted for stability.
template <typename T>
Tensor<T> softmax_bins(const Tensor<T>& logits) {
    if (logits.shape().empty() || logits.shape().back() < 2)
        throw std::invalid_argument("softmax_bins: last axis must have K >= 2, got " + shape_str(logits.shape()));
    const int k = logits.shape().back();
    const std::size_t rows = logits.numel() / k;
    std::vector<T> v(logits.numel());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = logits.values().data() + r * k;
        T* out = v.data() + r * k;
        T mx = in[0];
        for (int i = 1; i < k; ++i) mx = std::max(mx, in[i]);
        T s = T(0);
        for (int i = 0; i < k; ++i) {
            out[i] = std::exp(in[i] - mx);
            s += out[i];
        }
        for (int i = 0; i < k; ++i) out[i] /= s;
    }
    return Tensor<T>::make_op(logits.shape(), std::move(v), {logits}, [k, rows](TensorNode<T>& out) {
        auto& in = *out.parents[0];
        in.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = out.values.data() + r * k;
            const T* g = out.grad.data() + r * k;
            T* gi = in.grad.data() + r * k;
            T dot = T(0);
            for (int i = 0; i < k; ++i) dot += y[i] * g[i];
            for (int i = 0; i < k; ++i) gi[i] += y[i] * (g[i] - dot);
        }
    });
}

// [C*K,H,W] (K fastest within each channel block) -> [H,W,C,K].
template <typename T>
Tensor<T> chw_to_hwck(const Tensor<T>& a, int channels, int k) {
    if (a.shape().size() != 3 || a.shape()[0] != channels * k)
        throw std::invalid_argument("chw_to_hwck: expected [" + std::to_string(channels * k) + ",H,W], got " +
                                    shape_str(a.shape()));
    const int h = a.shape()[1], w = a.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<T> v(a.numel());
    for (int c = 0; c < channels; ++c)
        for (int b = 0; b < k; ++b) {
            const T* src = a.values().data() + (static_cast<std::size_t>(c) * k + b) * plane;
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    v[((static_cast<std::size_t>(y) * w + x) * channels + c) * k + b] =
                        src[static_cast<std::size_t>(y) * w + x];
        }
    return Tensor<T>::make_op({h, w, channels, k}, std::move(v), {a}, [channels, k, h, w, plane](TensorNode<T>& out) {
        auto& in = *out.parents[0];
        in.ensure_grad();
        for (int c = 0; c < channels; ++c)
            for (int b = 0; b < k; ++b) {
                T* dst = in.grad.data() + (static_cast<std::size_t>(c) * k + b) * plane;
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x)
                        dst[static_cast<std::size_t>(y) * w + x] +=
                            out.grad[((static_cast<std::size_t>(y) * w + x) * channels + c) * k + b];
            }
    });
}

// Weighted negative log-likelihood over a [H,W,C,K] probability grid.
// bins[i] indexes the true bin per (pixel, channel) in row-major [H,W,C];
// weights[i] selects/weights each term. Probabilities are floored at
// `prob_floor` before the log; floored terms get zero gradient.
template <typename T>
Tensor<T> nll_gather(const Tensor<T>& probs, const std::vector<int>& bins, const std::vector<T>& weights,
                     T prob_floor = T(1e-12)) {
    if (probs.shape().size() != 4)
        throw std::invalid_argument("nll_gather: expected [H,W,C,K], got " + shape_str(probs.shape()));
    const int k = probs.shape()[3];
    const std::size_t terms = probs.numel() / k;
    if (bins.size() != terms || weights.size() != terms)
        throw std::invalid_argument("nll_gather: got " + std::to_string(bins.size()) + " bins for " +
                                    std::to_string(terms) + " terms");
    for (std::size_t i = 0; i < terms; ++i)
        if (bins[i] < 0 || bins[i] >= k)
            throw std::invalid_argument("nll_gather: bin index " + std::to_string(bins[i]) + " out of range [0," +
                                        std::to_string(k) + ")");
    T total = T(0);
    for (std::size_t i = 0; i < terms; ++i) {
        if (weights[i] == T(0)) continue;
        const T p = std::max(probs.values()[i * k + bins[i]], prob_floor);
        total -= weights[i] * std::log(p);
    }
    return Tensor<T>::make_op({1}, {total}, {probs}, [bins, weights, k, terms, prob_floor](TensorNode<T>& out) {
        auto& in = *out.parents[0];
        in.ensure_grad();
        const T g = out.grad[0];
        for (std::size_t i = 0; i < terms; ++i) {
            if (weights[i] == T(0)) continue;
            const T p = in.values[i * k + bins[i]];
            if (p <= prob_floor) continue;
            in.grad[i * k + bins[i]] -= g * weights[i] / p;
        }
    });
}

}  // namespace vad
