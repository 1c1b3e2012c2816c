#include "arfp/frmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "arfp/errors.hpp"
#include "arfp/optim.hpp"

namespace arfp {

ToyEmbedder::ToyEmbedder(int image_size, int classes, int embed_dim, Rng& rng)
    : size_(image_size), classes_(classes), dim_(embed_dim) {
    if (image_size < 8 || image_size % 8 != 0) throw std::invalid_argument("embedder image size must be a multiple of 8");
    if (classes < 2 || embed_dim < 1) throw std::invalid_argument("embedder needs >= 2 classes and embed_dim >= 1");
    const int q = image_size / 8;
    c1 = Conv2d(params, "emb.c1", 3, 16, 3, 1, 1, rng);
    c2 = Conv2d(params, "emb.c2", 16, 32, 3, 1, 1, rng);
    c3 = Conv2d(params, "emb.c3", 32, 32, 3, 1, 1, rng);
    fc = Linear(params, "emb.fc", 32 * q * q, embed_dim, rng);
    cls = Linear(params, "emb.cls", embed_dim, classes, rng);
}

Var ToyEmbedder::features(const Var& x) const {
    if (x.value().rank() != 4 || x.dim(1) != 3 || x.dim(2) != size_ || x.dim(3) != size_)
        throw std::invalid_argument("embedder expects [N,3," + std::to_string(size_) + "," + std::to_string(size_) +
                                    "], got " + shape_str(x.shape()));
    Var h = avg_pool2x(relu(c1(x)));
    h = avg_pool2x(relu(c2(h)));
    h = avg_pool2x(relu(c3(h)));
    const int q = size_ / 8;
    return fc(reshape(h, {x.dim(0), 32 * q * q}));
}

Var ToyEmbedder::logits(const Var& x) const { return cls(relu(features(x))); }

ToyEmbedder train_toy_embedder(const Tensor& images, const std::vector<int>& labels, const EmbedderConfig& cfg) {
    if (images.rank() != 4 || images.dim(0) != static_cast<int>(labels.size()))
        throw std::invalid_argument("train_toy_embedder: images must be [N,3,S,S] with one label each");
    std::map<int, int> counts;
    for (int l : labels) ++counts[l];
    int usable = 0;
    for (const auto& [l, c] : counts) usable += c >= 2;
    if (counts.size() < 2 || usable < static_cast<int>(counts.size()))
        throw std::invalid_argument("train_toy_embedder: need at least 2 identities with at least 2 images each");
    if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0))
        throw std::invalid_argument("train_toy_embedder: invalid schedule");
    std::map<int, int> index;
    for (const auto& [l, c] : counts) index.emplace(l, static_cast<int>(index.size()));
    std::vector<int> y;
    for (int l : labels) y.push_back(index[l]);

    Rng init(cfg.seed, 21), order(cfg.seed, 22);
    ToyEmbedder phi(images.dim(2), static_cast<int>(counts.size()), cfg.embed_dim, init);
    Adam opt(phi.params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    const int n = images.dim(0);
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        const std::vector<int> perm = order.permutation(n);
        for (int b = 0; b < n; b += cfg.batch_size) {
            std::vector<int> idx(perm.begin() + b, perm.begin() + std::min(n, b + cfg.batch_size));
            std::vector<int> yb;
            for (int i : idx) yb.push_back(y[static_cast<std::size_t>(i)]);
            phi.params.zero_grad();
            Var loss = cross_entropy(phi.logits(Var(take_rows(images, idx))), yb);
            backward(loss);
            opt.step(phi.params);
        }
    }
    return phi;
}

namespace {

Embedding normalize(const double* v, int d) {
    double n = 0.0;
    for (int i = 0; i < d; ++i) n += v[i] * v[i];
    n = std::sqrt(n);
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateEmbeddingError("embedding has zero norm");
    Embedding e;
    e.h.assign(v, v + d);
    for (double& x : e.h) x /= n;
    return e;
}

}  // namespace

std::vector<Embedding> embed_batch(const Tensor& x, const ToyEmbedder& phi) {
    NoGradGuard ng;
    const Tensor f = phi.features(Var(x)).value();
    const int d = f.dim(1);
    std::vector<Embedding> out;
    for (int i = 0; i < f.dim(0); ++i) out.push_back(normalize(f.data() + static_cast<std::size_t>(i * d), d));
    return out;
}

Embedding embed(const Tensor& x, const ToyEmbedder& phi) {
    if (x.rank() != 3) throw std::invalid_argument("embed: expected a [3,H,W] image");
    return embed_batch(x.reshaped({1, x.dim(0), x.dim(1), x.dim(2)}), phi)[0];
}

double cosine_sim(const Embedding& a, const Embedding& b) {
    if (a.h.size() != b.h.size()) throw std::invalid_argument("cosine_sim: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.h.size(); ++i) s += a.h[i] * b.h[i];
    return std::clamp(s, -1.0, 1.0);
}

Gallery build_gallery(const Tensor& images, const std::vector<int>& labels, const ToyEmbedder& phi) {
    if (images.rank() != 4 || images.dim(0) != static_cast<int>(labels.size()))
        throw std::invalid_argument("build_gallery: one label per image required");
    Gallery g;
    std::vector<Embedding> es = embed_batch(images, phi);
    for (std::size_t i = 0; i < es.size(); ++i) g.add(labels[i], std::move(es[i]));
    return g;
}

double best_similarity(const Embedding& probe, const Gallery& gallery, int label) {
    auto it = gallery.refs.find(label);
    if (it == gallery.refs.end() || it->second.empty()) return -1.0;
    double best = -2.0;
    for (const Embedding& r : it->second) best = std::max(best, cosine_sim(probe, r));
    return best;
}

int identify(const Embedding& probe, const Gallery& gallery) {
    if (gallery.empty()) throw std::invalid_argument("identify: empty gallery");
    int best_label = gallery.refs.begin()->first;
    double best = -3.0;
    for (const auto& [label, refs] : gallery.refs) {
        if (refs.empty()) throw std::invalid_argument("identify: gallery label without references");
        const double s = best_similarity(probe, gallery, label);
        if (s > best) {
            best = s;
            best_label = label;
        }
    }
    return best_label;
}

double psr(const Tensor& probes, const std::vector<int>& labels, const Gallery& gallery, const ToyEmbedder& phi,
           const PsrConfig& cfg) {
    if (probes.rank() != 4 || probes.dim(0) == 0) throw std::invalid_argument("psr: empty probe set");
    if (probes.dim(0) != static_cast<int>(labels.size())) throw std::invalid_argument("psr: one label per probe required");
    if (gallery.empty()) throw std::invalid_argument("psr: empty gallery");
    const std::vector<Embedding> es = embed_batch(probes, phi);
    int hits = 0;
    for (std::size_t i = 0; i < es.size(); ++i) {
        if (cfg.mode == PsrMode::ClosedSet)
            hits += identify(es[i], gallery) == labels[i];
        else
            hits += best_similarity(es[i], gallery, labels[i]) >= cfg.threshold;
    }
    return psr_from_accuracy(100.0 * hits / static_cast<double>(es.size()));
}

double psr_from_accuracy(double accuracy_percent) {
    if (!(accuracy_percent >= 0.0 && accuracy_percent <= 100.0))
        throw std::invalid_argument("accuracy must lie in [0, 100]");
    return 100.0 - accuracy_percent;
}

double psnr(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty images");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = (a[i] - b[i]) / 2.0;
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

// Valid-region Gaussian filtering of one H x W plane.
std::vector<double> filter_valid(const std::vector<double>& p, int H, int W, const std::vector<double>& g) {
    const int oh = H - kWin + 1, ow = W - kWin + 1;
    std::vector<double> tmp(static_cast<std::size_t>(H * ow)), out(static_cast<std::size_t>(oh * ow));
    for (int h = 0; h < H; ++h)
        for (int w = 0; w < ow; ++w) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * p[static_cast<std::size_t>(h * W + w + k)];
            tmp[static_cast<std::size_t>(h * ow + w)] = s;
        }
    for (int h = 0; h < oh; ++h)
        for (int w = 0; w < ow; ++w) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k) s += g[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>((h + k) * ow + w)];
            out[static_cast<std::size_t>(h * ow + w)] = s;
        }
    return out;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (a.rank() != 3) throw std::invalid_argument("ssim: expected [C,H,W] images");
    const int C = a.dim(0), H = a.dim(1), W = a.dim(2);
    if (H < kWin || W < kWin) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    std::vector<double> g(kWin);
    double gs = 0.0;
    for (int i = 0; i < kWin; ++i) gs += g[static_cast<std::size_t>(i)] = std::exp(-((i - 5) * (i - 5)) / (2.0 * kSigma * kSigma));
    for (double& v : g) v /= gs;
    const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    const std::size_t plane = static_cast<std::size_t>(H * W);
    double total = 0.0;
    for (int c = 0; c < C; ++c) {
        std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            x[i] = (a[c * plane + i] + 1.0) / 2.0;
            y[i] = (b[c * plane + i] + 1.0) / 2.0;
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = filter_valid(x, H, W, g), my = filter_valid(y, H, W, g);
        const auto sxx = filter_valid(xx, H, W, g), syy = filter_valid(yy, H, W, g), sxy = filter_valid(xy, H, W, g);
        double s = 0.0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
            s += ((2 * mx[i] * my[i] + C1) * (2 * cxy + C2)) / ((mx[i] * mx[i] + my[i] * my[i] + C1) * (vx + vy + C2));
        }
        total += s / static_cast<double>(mx.size());
    }
    return total / C;
}

namespace {

template <class F>
double batch_mean(const Tensor& a, const Tensor& b, F f) {
    if (!a.same_shape(b) || a.rank() != 4 || a.dim(0) == 0) throw std::invalid_argument("batch metric: shape mismatch");
    const Shape s(a.shape().begin() + 1, a.shape().end());
    double t = 0.0;
    for (int i = 0; i < a.dim(0); ++i) t += f(a.sample(i).reshaped(s), b.sample(i).reshaped(s));
    return t / a.dim(0);
}

}  // namespace

double mean_psnr(const Tensor& a, const Tensor& b) { return batch_mean(a, b, psnr); }
double mean_ssim(const Tensor& a, const Tensor& b) { return batch_mean(a, b, ssim); }

}  // namespace arfp
