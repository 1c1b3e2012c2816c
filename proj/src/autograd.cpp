#include "arfp/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "arfp/errors.hpp"

namespace arfp {

namespace {

thread_local bool g_grad_enabled = true;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
}

void require_rank(const Var& x, int r, const char* op) {
    if (x.value().rank() != r)
        throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                                    shape_str(x.shape()));
}

// Builds the output Var, attaching parents and the backward closure only when
// a gradient can flow.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
    bool needs = false;
    if (g_grad_enabled)
        for (const Var& v : inputs)
            if (v.defined() && v.requires_grad()) needs = true;
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (needs) {
        n->requires_grad = true;
        for (const Var& v : inputs)
            if (v.defined()) n->parents.push_back(v.node());
        n->backward_fn = std::move(fn);
    }
    return Var::from_node(std::move(n));
}

bool wants(const Var& v) { return v.defined() && v.requires_grad(); }

template <typename F>
Var unary(const Var& x, F f, std::function<double(double x, double y)> df) {
    Tensor out(x.shape());
    const double* xd = x.value().data();
    double* od = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) od[i] = f(xd[i]);
    auto xn = x.node();
    return make_result(std::move(out), {x}, [xn, df](Node& self) {
        Tensor& g = xn->ensure_grad();
        const double* xd2 = xn->value.data();
        const double* yd = self.value.data();
        const double* gd = self.grad.data();
        double* out_g = g.data();
        for (std::size_t i = 0; i < g.size(); ++i) out_g[i] += gd[i] * df(xd2[i], yd[i]);
    });
}

}  // namespace

Tensor& Node::ensure_grad() {
    if (grad.size() != value.size() || grad.shape() != value.shape()) grad = Tensor(value.shape(), 0.0);
    return grad;
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var Var::from_node(std::shared_ptr<Node> n) {
    Var v;
    v.node_ = std::move(n);
    return v;
}

void Var::zero_grad() {
    if (node_) node_->grad = Tensor();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void backward(const Var& root) {
    if (root.value().size() != 1) throw std::invalid_argument("backward: root must be a scalar");
    backward(root, Tensor(root.shape(), 1.0));
}

void backward(const Var& root, const Tensor& seed) {
    if (!root.requires_grad()) return;
    if (seed.shape() != root.shape()) throw std::invalid_argument("backward: seed shape mismatch");
    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    Tensor& rg = root.node()->ensure_grad();
    for (std::size_t i = 0; i < rg.size(); ++i) rg[i] += seed[i];
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
    }
    // Intermediate gradients are no longer needed; leaves keep theirs.
    for (Node* n : order)
        if (n->backward_fn) n->grad = Tensor();
}

// ---------------------------------------------------------------- arithmetic

Var add(const Var& a, const Var& b) {
    require_same(a, b, "add");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    auto an = a.node(), bn = b.node();
    bool ga = wants(a), gb = wants(b);
    return make_result(std::move(out), {a, b}, [an, bn, ga, gb](Node& self) {
        if (ga) {
            Tensor& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (gb) {
            Tensor& g = bn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    require_same(a, b, "sub");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    auto an = a.node(), bn = b.node();
    bool ga = wants(a), gb = wants(b);
    return make_result(std::move(out), {a, b}, [an, bn, ga, gb](Node& self) {
        if (ga) {
            Tensor& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
        if (gb) {
            Tensor& g = bn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    require_same(a, b, "mul");
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    auto an = a.node(), bn = b.node();
    bool ga = wants(a), gb = wants(b);
    return make_result(std::move(out), {a, b}, [an, bn, ga, gb](Node& self) {
        if (ga) {
            Tensor& g = an->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
        }
        if (gb) {
            Tensor& g = bn->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
        }
    });
}

Var scale(const Var& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
    auto an = a.node();
    return make_result(std::move(out), {a}, [an, s](Node& self) {
        Tensor& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + s;
    auto an = a.node();
    return make_result(std::move(out), {a}, [an](Node& self) {
        Tensor& g = an->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var constant_like(const Tensor& t) { return Var(t, false); }

Var abs(const Var& x) {
    return unary(x, [](double v) { return std::fabs(v); },
                 [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& x) {
    return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var tanh(const Var& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var sin(const Var& x) {
    return unary(x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Var relu(const Var& x) {
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(const Var& x, double slope) {
    return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; },
                 [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Var clamp(const Var& x, double lo, double hi) {
    return unary(x, [lo, hi](double v) { return std::min(hi, std::max(lo, v)); },
                 [lo, hi](double v, double) { return (v > lo && v < hi) ? 1.0 : 0.0; });
}

// ------------------------------------------------------------ convolution

Var conv2d(const Var& x, const Var& w, const Var& bias, int stride, int pad) {
    require_rank(x, 4, "conv2d");
    require_rank(w, 4, "conv2d weight");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int O = w.dim(0), K = w.dim(2);
    if (w.dim(1) != C || w.dim(3) != K)
        throw std::invalid_argument("conv2d: weight " + shape_str(w.shape()) + " incompatible with input " +
                                    shape_str(x.shape()));
    if (bias.defined() && (bias.value().size() != static_cast<std::size_t>(O)))
        throw std::invalid_argument("conv2d: bias size mismatch");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/padding");
    const int Ho = (H + 2 * pad - K) / stride + 1;
    const int Wo = (W + 2 * pad - K) / stride + 1;
    if (Ho <= 0 || Wo <= 0) throw std::invalid_argument("conv2d: input too small for kernel");
    const int CKK = C * K * K;
    const int P = Ho * Wo;
    const long cols = static_cast<long>(N) * P;

    auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(CKK) * cols, 0.0);
    const double* xd = x.value().data();
    for (int c = 0; c < C; ++c)
        for (int ki = 0; ki < K; ++ki)
            for (int kj = 0; kj < K; ++kj) {
                double* row = col->data() + static_cast<std::size_t>((c * K + ki) * K + kj) * cols;
                for (int n = 0; n < N; ++n) {
                    const double* xc = xd + (static_cast<std::size_t>(n) * C + c) * H * W;
                    double* r = row + static_cast<std::size_t>(n) * P;
                    for (int oh = 0; oh < Ho; ++oh) {
                        const int ih = oh * stride - pad + ki;
                        if (ih < 0 || ih >= H) continue;
                        for (int ow = 0; ow < Wo; ++ow) {
                            const int iw = ow * stride - pad + kj;
                            if (iw >= 0 && iw < W) r[oh * Wo + ow] = xc[ih * W + iw];
                        }
                    }
                }
            }

    RowMat outm(O, cols);
    outm.noalias() = CMapMat(w.value().data(), O, CKK) * CMapMat(col->data(), CKK, cols);
    Tensor out({N, O, Ho, Wo});
    double* od = out.data();
    const double* bd = bias.defined() ? bias.value().data() : nullptr;
    for (int n = 0; n < N; ++n)
        for (int o = 0; o < O; ++o) {
            const double b = bd ? bd[o] : 0.0;
            const double* src = outm.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * P;
            double* dst = od + (static_cast<std::size_t>(n) * O + o) * P;
            for (int p = 0; p < P; ++p) dst[p] = src[p] + b;
        }

    auto xn = x.node(), wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    const bool gx = wants(x), gw = wants(w), gb = wants(bias);
    return make_result(std::move(out), {x, w, bias}, [=](Node& self) {
        RowMat gm(O, cols);
        const double* gd = self.grad.data();
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) {
                const double* src = gd + (static_cast<std::size_t>(n) * O + o) * P;
                double* dst = gm.data() + static_cast<std::size_t>(o) * cols + static_cast<std::size_t>(n) * P;
                std::copy(src, src + P, dst);
            }
        if (gb) {
            Tensor& g = bn->ensure_grad();
            for (int o = 0; o < O; ++o) g[static_cast<std::size_t>(o)] += gm.row(o).sum();
        }
        if (gw) {
            Tensor& g = wn->ensure_grad();
            MapMat(g.data(), O, CKK).noalias() += gm * CMapMat(col->data(), CKK, cols).transpose();
        }
        if (gx) {
            RowMat dcol(CKK, cols);
            dcol.noalias() = CMapMat(wn->value.data(), O, CKK).transpose() * gm;
            Tensor& g = xn->ensure_grad();
            double* gxd = g.data();
            for (int c = 0; c < C; ++c)
                for (int ki = 0; ki < K; ++ki)
                    for (int kj = 0; kj < K; ++kj) {
                        const double* row = dcol.data() + static_cast<std::size_t>((c * K + ki) * K + kj) * cols;
                        for (int n = 0; n < N; ++n) {
                            double* xc = gxd + (static_cast<std::size_t>(n) * C + c) * H * W;
                            const double* r = row + static_cast<std::size_t>(n) * P;
                            for (int oh = 0; oh < Ho; ++oh) {
                                const int ih = oh * stride - pad + ki;
                                if (ih < 0 || ih >= H) continue;
                                for (int ow = 0; ow < Wo; ++ow) {
                                    const int iw = ow * stride - pad + kj;
                                    if (iw >= 0 && iw < W) xc[ih * W + iw] += r[oh * Wo + ow];
                                }
                            }
                        }
                    }
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
    require_rank(x, 2, "linear");
    require_rank(w, 2, "linear weight");
    const int N = x.dim(0), I = x.dim(1), O = w.dim(0);
    if (w.dim(1) != I)
        throw std::invalid_argument("linear: weight " + shape_str(w.shape()) + " incompatible with input " +
                                    shape_str(x.shape()));
    if (bias.defined() && bias.value().size() != static_cast<std::size_t>(O))
        throw std::invalid_argument("linear: bias size mismatch");
    Tensor out({N, O});
    MapMat om(out.data(), N, O);
    om.noalias() = CMapMat(x.value().data(), N, I) * CMapMat(w.value().data(), O, I).transpose();
    if (bias.defined())
        for (int n = 0; n < N; ++n)
            for (int o = 0; o < O; ++o) om(n, o) += bias.value()[static_cast<std::size_t>(o)];
    auto xn = x.node(), wn = w.node();
    auto bn = bias.defined() ? bias.node() : nullptr;
    const bool gx = wants(x), gw = wants(w), gb = wants(bias);
    return make_result(std::move(out), {x, w, bias}, [=](Node& self) {
        CMapMat gm(self.grad.data(), N, O);
        if (gb) {
            Tensor& g = bn->ensure_grad();
            for (int o = 0; o < O; ++o) g[static_cast<std::size_t>(o)] += gm.col(o).sum();
        }
        if (gw) MapMat(wn->ensure_grad().data(), O, I).noalias() += gm.transpose() * CMapMat(xn->value.data(), N, I);
        if (gx) MapMat(xn->ensure_grad().data(), N, I).noalias() += gm * CMapMat(wn->value.data(), O, I);
    });
}

Var film(const Var& f, const Var& gamma, const Var& beta) {
    require_rank(f, 4, "film");
    const int N = f.dim(0), C = f.dim(1), P = f.dim(2) * f.dim(3);
    const Shape want{N, C};
    if (gamma.shape() != want || beta.shape() != want)
        throw std::invalid_argument("film: modulation shape must be " + shape_str(want) + ", got " +
                                    shape_str(gamma.shape()) + " and " + shape_str(beta.shape()));
    Tensor out(f.shape());
    const double* fd = f.value().data();
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const double g = gamma.value()[static_cast<std::size_t>(n * C + c)];
            const double b = beta.value()[static_cast<std::size_t>(n * C + c)];
            const std::size_t off = (static_cast<std::size_t>(n) * C + c) * P;
            for (int p = 0; p < P; ++p) out[off + p] = g * fd[off + p] + b;
        }
    auto fn = f.node(), gn = gamma.node(), bn = beta.node();
    const bool gf = wants(f), gg = wants(gamma), gbeta = wants(beta);
    return make_result(std::move(out), {f, gamma, beta}, [=](Node& self) {
        const double* gd = self.grad.data();
        Tensor* gF = gf ? &fn->ensure_grad() : nullptr;
        Tensor* gG = gg ? &gn->ensure_grad() : nullptr;
        Tensor* gB = gbeta ? &bn->ensure_grad() : nullptr;
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < C; ++c) {
                const std::size_t nc = static_cast<std::size_t>(n * C + c);
                const std::size_t off = nc * P;
                const double g = gn->value[nc];
                double sg = 0.0, sb = 0.0;
                for (int p = 0; p < P; ++p) {
                    sg += gd[off + p] * fn->value[off + p];
                    sb += gd[off + p];
                }
                if (gF)
                    for (int p = 0; p < P; ++p) (*gF)[off + p] += g * gd[off + p];
                if (gG) (*gG)[nc] += sg;
                if (gB) (*gB)[nc] += sb;
            }
    });
}

// ---------------------------------------------------------------- resampling

Var upsample_nearest2x(const Var& x) {
    require_rank(x, 4, "upsample_nearest2x");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor out({N, C, 2 * H, 2 * W});
    for (int nc = 0; nc < N * C; ++nc)
        for (int h = 0; h < 2 * H; ++h)
            for (int w = 0; w < 2 * W; ++w)
                out[(static_cast<std::size_t>(nc) * 2 * H + h) * 2 * W + w] =
                    x.value()[(static_cast<std::size_t>(nc) * H + h / 2) * W + w / 2];
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc)
            for (int h = 0; h < 2 * H; ++h)
                for (int w = 0; w < 2 * W; ++w)
                    g[(static_cast<std::size_t>(nc) * H + h / 2) * W + w / 2] +=
                        self.grad[(static_cast<std::size_t>(nc) * 2 * H + h) * 2 * W + w];
    });
}

Var avg_pool2x(const Var& x) {
    require_rank(x, 4, "avg_pool2x");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2) / 2, W = x.dim(3) / 2;
    const int Hi = x.dim(2), Wi = x.dim(3);
    Tensor out({N, C, H, W});
    for (int nc = 0; nc < N * C; ++nc)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                const double* b = x.value().data() + (static_cast<std::size_t>(nc) * Hi + 2 * h) * Wi + 2 * w;
                out[(static_cast<std::size_t>(nc) * H + h) * W + w] = 0.25 * (b[0] + b[1] + b[Wi] + b[Wi + 1]);
            }
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const double v = 0.25 * self.grad[(static_cast<std::size_t>(nc) * H + h) * W + w];
                    double* b = g.data() + (static_cast<std::size_t>(nc) * Hi + 2 * h) * Wi + 2 * w;
                    b[0] += v;
                    b[1] += v;
                    b[Wi] += v;
                    b[Wi + 1] += v;
                }
    });
}

namespace {
struct Lerp {
    int i0, i1;
    double w1;
};
std::vector<Lerp> lerp_table(int in, int out) {
    std::vector<Lerp> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        if (s < 0) s = 0;
        int i0 = static_cast<int>(std::floor(s));
        if (i0 > in - 1) i0 = in - 1;
        const int i1 = std::min(i0 + 1, in - 1);
        t[static_cast<std::size_t>(o)] = {i0, i1, s - i0};
    }
    return t;
}
}  // namespace

Var resize_bilinear(const Var& x, int out_h, int out_w) {
    require_rank(x, 4, "resize_bilinear");
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const auto th = lerp_table(H, out_h), tw = lerp_table(W, out_w);
    Tensor out({N, C, out_h, out_w});
    for (int nc = 0; nc < N * C; ++nc) {
        const double* src = x.value().data() + static_cast<std::size_t>(nc) * H * W;
        double* dst = out.data() + static_cast<std::size_t>(nc) * out_h * out_w;
        for (int h = 0; h < out_h; ++h) {
            const Lerp& a = th[static_cast<std::size_t>(h)];
            for (int w = 0; w < out_w; ++w) {
                const Lerp& b = tw[static_cast<std::size_t>(w)];
                const double top = src[a.i0 * W + b.i0] * (1 - b.w1) + src[a.i0 * W + b.i1] * b.w1;
                const double bot = src[a.i1 * W + b.i0] * (1 - b.w1) + src[a.i1 * W + b.i1] * b.w1;
                dst[h * out_w + w] = top * (1 - a.w1) + bot * a.w1;
            }
        }
    }
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int nc = 0; nc < N * C; ++nc) {
            double* dst = g.data() + static_cast<std::size_t>(nc) * H * W;
            const double* go = self.grad.data() + static_cast<std::size_t>(nc) * out_h * out_w;
            for (int h = 0; h < out_h; ++h) {
                const Lerp& a = th[static_cast<std::size_t>(h)];
                for (int w = 0; w < out_w; ++w) {
                    const Lerp& b = tw[static_cast<std::size_t>(w)];
                    const double v = go[h * out_w + w];
                    dst[a.i0 * W + b.i0] += v * (1 - a.w1) * (1 - b.w1);
                    dst[a.i0 * W + b.i1] += v * (1 - a.w1) * b.w1;
                    dst[a.i1 * W + b.i0] += v * a.w1 * (1 - b.w1);
                    dst[a.i1 * W + b.i1] += v * a.w1 * b.w1;
                }
            }
        }
    });
}

// ------------------------------------------------------------ restructuring

Var concat(const Var& a, const Var& b) {
    if (a.value().rank() != b.value().rank() || a.value().rank() < 2)
        throw std::invalid_argument("concat: rank mismatch");
    Shape sa = a.shape(), sb = b.shape();
    for (std::size_t i = 0; i < sa.size(); ++i)
        if (i != 1 && sa[i] != sb[i])
            throw std::invalid_argument("concat: incompatible shapes " + shape_str(sa) + " and " + shape_str(sb));
    const int N = sa[0];
    const std::size_t pa = a.value().size() / static_cast<std::size_t>(N);
    const std::size_t pb = b.value().size() / static_cast<std::size_t>(N);
    Shape so = sa;
    so[1] = sa[1] + sb[1];
    Tensor out(so);
    for (int n = 0; n < N; ++n) {
        std::copy(a.value().data() + n * pa, a.value().data() + (n + 1) * pa, out.data() + n * (pa + pb));
        std::copy(b.value().data() + n * pb, b.value().data() + (n + 1) * pb, out.data() + n * (pa + pb) + pa);
    }
    auto an = a.node(), bn = b.node();
    const bool ga = wants(a), gb = wants(b);
    return make_result(std::move(out), {a, b}, [=](Node& self) {
        for (int n = 0; n < N; ++n) {
            const double* src = self.grad.data() + n * (pa + pb);
            if (ga) {
                double* d = an->ensure_grad().data() + n * pa;
                for (std::size_t i = 0; i < pa; ++i) d[i] += src[i];
            }
            if (gb) {
                double* d = bn->ensure_grad().data() + n * pb;
                for (std::size_t i = 0; i < pb; ++i) d[i] += src[pa + i];
            }
        }
    });
}

Var slice_cols(const Var& x, int start, int count) {
    require_rank(x, 2, "slice_cols");
    const int N = x.dim(0), D = x.dim(1);
    if (start < 0 || count < 0 || start + count > D) throw std::invalid_argument("slice_cols: range out of bounds");
    Tensor out({N, count});
    for (int n = 0; n < N; ++n)
        for (int j = 0; j < count; ++j)
            out[static_cast<std::size_t>(n * count + j)] = x.value()[static_cast<std::size_t>(n * D + start + j)];
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int j = 0; j < count; ++j)
                g[static_cast<std::size_t>(n * D + start + j)] += self.grad[static_cast<std::size_t>(n * count + j)];
    });
}

Var take_rows(const Var& x, const std::vector<int>& idx) {
    Tensor out = take_rows(x.value(), idx);
    const std::size_t per = x.value().size() / static_cast<std::size_t>(x.dim(0));
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (std::size_t r = 0; r < idx.size(); ++r)
            for (std::size_t k = 0; k < per; ++k) g[static_cast<std::size_t>(idx[r]) * per + k] += self.grad[r * per + k];
    });
}

Var repeat_channels(const Var& x, int channels) {
    require_rank(x, 4, "repeat_channels");
    if (x.dim(1) != 1 || channels < 1) throw std::invalid_argument("repeat_channels: input must have one channel");
    const int N = x.dim(0), P = x.dim(2) * x.dim(3);
    Tensor out({N, channels, x.dim(2), x.dim(3)});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < channels; ++c)
            std::copy(x.value().data() + static_cast<std::size_t>(n) * P,
                      x.value().data() + static_cast<std::size_t>(n + 1) * P,
                      out.data() + (static_cast<std::size_t>(n) * channels + c) * P);
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (int c = 0; c < channels; ++c)
                for (int p = 0; p < P; ++p)
                    g[static_cast<std::size_t>(n) * P + p] +=
                        self.grad[(static_cast<std::size_t>(n) * channels + c) * P + p];
    });
}

Var reshape(const Var& x, const Shape& shape) {
    Tensor out = x.value().reshaped(shape);
    auto xn = x.node();
    return make_result(std::move(out), {x}, [xn](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

Var detach(const Var& x) { return Var(x.value(), false); }

// ---------------------------------------------------------------- reductions

Var sum(const Var& x) {
    double s = 0.0;
    for (double v : x.value().vec()) s += v;
    auto xn = x.node();
    return make_result(Tensor({1}, s), {x}, [xn](Node& self) {
        Tensor& g = xn->ensure_grad();
        const double gv = self.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gv;
    });
}

Var mean(const Var& x) {
    if (x.value().size() == 0) throw std::invalid_argument("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.value().size()));
}

Var sum_per_sample(const Var& x) {
    if (x.value().rank() < 1) throw std::invalid_argument("sum_per_sample: rank 0");
    const int N = x.dim(0);
    const std::size_t per = x.value().size() / static_cast<std::size_t>(N);
    Tensor out({N});
    for (int n = 0; n < N; ++n) {
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) s += x.value()[n * per + i];
        out[static_cast<std::size_t>(n)] = s;
    }
    auto xn = x.node();
    return make_result(std::move(out), {x}, [=](Node& self) {
        Tensor& g = xn->ensure_grad();
        for (int n = 0; n < N; ++n)
            for (std::size_t i = 0; i < per; ++i) g[n * per + i] += self.grad[static_cast<std::size_t>(n)];
    });
}

Var mean_per_sample(const Var& x) {
    const std::size_t per = x.value().size() / static_cast<std::size_t>(x.dim(0));
    return scale(sum_per_sample(x), 1.0 / static_cast<double>(per));
}

Var cosine_rows(const Var& a, const Var& b) {
    require_rank(a, 2, "cosine_rows");
    require_same(a, b, "cosine_rows");
    const int N = a.dim(0), D = a.dim(1);
    Tensor out({N});
    std::vector<double> na(static_cast<std::size_t>(N)), nb(static_cast<std::size_t>(N));
    for (int n = 0; n < N; ++n) {
        double dot = 0, aa = 0, bb = 0;
        for (int d = 0; d < D; ++d) {
            const double x = a.value()[static_cast<std::size_t>(n * D + d)];
            const double y = b.value()[static_cast<std::size_t>(n * D + d)];
            dot += x * y;
            aa += x * x;
            bb += y * y;
        }
        if (aa == 0.0 || bb == 0.0) throw DegenerateEmbeddingError("cosine similarity of a zero-norm embedding");
        na[static_cast<std::size_t>(n)] = std::sqrt(aa);
        nb[static_cast<std::size_t>(n)] = std::sqrt(bb);
        out[static_cast<std::size_t>(n)] = dot / (na[static_cast<std::size_t>(n)] * nb[static_cast<std::size_t>(n)]);
    }
    auto an = a.node(), bn = b.node();
    const bool ga = wants(a), gb = wants(b);
    return make_result(std::move(out), {a, b}, [=](Node& self) {
        for (int n = 0; n < N; ++n) {
            const std::size_t sn = static_cast<std::size_t>(n);
            const double c = self.value[sn], g = self.grad[sn];
            const double inv = 1.0 / (na[sn] * nb[sn]);
            for (int d = 0; d < D; ++d) {
                const std::size_t i = static_cast<std::size_t>(n * D + d);
                const double x = an->value[i], y = bn->value[i];
                if (ga) an->ensure_grad()[i] += g * (y * inv - c * x / (na[sn] * na[sn]));
                if (gb) bn->ensure_grad()[i] += g * (x * inv - c * y / (nb[sn] * nb[sn]));
            }
        }
    });
}

Var cross_entropy(const Var& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "cross_entropy");
    const int N = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != N) throw std::invalid_argument("cross_entropy: label count mismatch");
    auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(N * K));
    double loss = 0.0;
    for (int n = 0; n < N; ++n) {
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= K) throw std::invalid_argument("cross_entropy: label out of range");
        const double* l = logits.value().data() + static_cast<std::size_t>(n * K);
        double mx = l[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, l[k]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(l[k] - mx);
        for (int k = 0; k < K; ++k) (*probs)[static_cast<std::size_t>(n * K + k)] = std::exp(l[k] - mx) / z;
        loss += -(l[y] - mx - std::log(z));
    }
    auto ln = logits.node();
    return make_result(Tensor({1}, loss / N), {logits}, [=](Node& self) {
        Tensor& g = ln->ensure_grad();
        const double s = self.grad[0] / N;
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k) {
                const std::size_t i = static_cast<std::size_t>(n * K + k);
                g[i] += s * ((*probs)[i] - (k == labels[static_cast<std::size_t>(n)] ? 1.0 : 0.0));
            }
    });
}

}  // namespace arfp
