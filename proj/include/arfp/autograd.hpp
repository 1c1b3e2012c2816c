#pragma once

// Minimal reverse-mode automatic differentiation over Tensor.
//
// A Var wraps a graph node. Ops record their inputs and a backward closure
// only when gradient recording is enabled and some input requires a gradient,
// so inference under NoGradGuard builds no graph.

#include <functional>
#include <memory>
#include <vector>

#include "arfp/tensor.hpp"

namespace arfp {

struct Node {
    Tensor value;
    Tensor grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    Tensor& ensure_grad();
};

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(node_); }
    const Tensor& value() const { return node_->value; }
    Tensor& mutable_value() { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    Tensor& mutable_grad() { return node_->ensure_grad(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    const Shape& shape() const { return node_->value.shape(); }
    int dim(int i) const { return node_->value.dim(i); }
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }
    static Var from_node(std::shared_ptr<Node> n);

private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Backpropagate from a scalar root (seed 1) or with an explicit seed gradient.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

// Elementwise arithmetic; shapes must match exactly.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var constant_like(const Tensor& t);

Var abs(const Var& x);
Var square(const Var& x);
Var tanh(const Var& x);
Var sin(const Var& x);
Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
// Gradient passes where lo < x < hi and is zero where the clamp is active.
Var clamp(const Var& x, double lo, double hi);

// x [N,C,H,W], w [O,C,K,K], bias [O] (may be undefined).
Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad);
// x [N,I], w [O,I], bias [O] (may be undefined).
Var linear(const Var& x, const Var& w, const Var& bias);
// Channel-wise affine modulation: out[n,c,h,w] = gamma[n,c]*f[n,c,h,w] + beta[n,c].
Var film(const Var& f, const Var& gamma, const Var& beta);

Var upsample_nearest2x(const Var& x);
Var avg_pool2x(const Var& x);
// Bilinear resize with half-pixel centers (align_corners = false).
Var resize_bilinear(const Var& x, int out_h, int out_w);
// Concatenate along dimension 1 (channels for images, features for matrices).
Var concat(const Var& a, const Var& b);
// Columns [start, start+count) of a rank-2 tensor.
Var slice_cols(const Var& x, int start, int count);
// Rows idx of the leading dimension (repeats allowed).
Var take_rows(const Var& x, const std::vector<int>& idx);
// Repeat a single-channel image across `channels` channels.
Var repeat_channels(const Var& x, int channels);
Var reshape(const Var& x, const Shape& shape);
Var detach(const Var& x);

enum class Reduction { Sum, Mean };

Var sum(const Var& x);
Var mean(const Var& x);
// Reductions over everything except the leading (batch) dimension -> [N].
Var sum_per_sample(const Var& x);
Var mean_per_sample(const Var& x);
inline Var reduce(const Var& x, Reduction r) { return r == Reduction::Sum ? sum(x) : mean(x); }
// Row-wise cosine similarity of two [N,D] tensors -> [N]. Zero-norm rows raise
// DegenerateEmbeddingError.
Var cosine_rows(const Var& a, const Var& b);
// Mean softmax cross-entropy of logits [N,K] against integer labels.
Var cross_entropy(const Var& logits, const std::vector<int>& labels);

}  // namespace arfp
