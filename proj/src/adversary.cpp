#include "arfp/adversary.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "arfp/optim.hpp"

namespace arfp {

Restorer::Restorer(int width, Rng& rng, const std::string& p) : width_(width) {
    if (width < 1) throw std::invalid_argument("restorer width must be >= 1");
    const int W = width;
    c1 = Conv2d(params, p + ".c1", 3, W, 3, 1, 1, rng);
    c2 = Conv2d(params, p + ".c2", W, 2 * W, 3, 2, 1, rng);
    c3 = Conv2d(params, p + ".c3", 2 * W, 2 * W, 3, 1, 1, rng);
    c4 = Conv2d(params, p + ".c4", 3 * W, W, 3, 1, 1, rng);
    o = Conv2d(params, p + ".o", W, 3, 3, 1, 1, rng);
    o.zero_init();
}

Var Restorer::operator()(const Var& z) const {
    if (z.value().rank() != 4 || z.dim(1) != 3 || z.dim(2) % 2 != 0 || z.dim(3) % 2 != 0)
        throw std::invalid_argument("restorer expects [N,3,H,W] with even H and W, got " + shape_str(z.shape()));
    Var a = leaky_relu(c1(z), 0.2);
    Var b = leaky_relu(c2(a), 0.2);
    b = upsample_nearest2x(leaky_relu(c3(b), 0.2));
    Var h = leaky_relu(c4(concat(a, b)), 0.2);
    return clamp(add(z, o(h)), -1.0, 1.0);
}

Tensor restore(const Tensor& z, const Restorer& a) {
    if (z.rank() != 3 || z.dim(0) != 3) throw std::invalid_argument("restore: expected a [3,H,W] image");
    for (double v : z.vec())
        if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument("restore: pixel values outside [-1,1]");
    NoGradGuard ng;
    Shape s{1, 3, z.dim(1), z.dim(2)};
    Var out = a(Var(z.reshaped(s)));
    return out.value().reshaped(z.shape());
}

double rev_loss(const Tensor& x, const Tensor& x_tilde, double lambda_l2) {
    if (!x.same_shape(x_tilde))
        throw std::invalid_argument("rev_loss: shape mismatch " + shape_str(x.shape()) + " vs " +
                                    shape_str(x_tilde.shape()));
    if (!(lambda_l2 >= 0.0)) throw std::invalid_argument("rev_loss: lambda_l2 must be >= 0");
    double l1 = 0.0, l2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - x_tilde[i];
        l1 += std::fabs(d);
        l2 += d * d;
    }
    return l1 + lambda_l2 * l2;
}

Var rev_loss(const Var& x, const Var& x_tilde, double lambda_l2, Reduction red) {
    if (x.shape() != x_tilde.shape()) throw std::invalid_argument("rev_loss: shape mismatch");
    if (!(lambda_l2 >= 0.0)) throw std::invalid_argument("rev_loss: lambda_l2 must be >= 0");
    Var d = sub(x, x_tilde);
    return add(reduce(abs(d), red), scale(reduce(square(d), red), lambda_l2));
}

std::string to_string(AttackFamily f) {
    switch (f) {
        case AttackFamily::PairedRestorer: return "paired-restorer";
        case AttackFamily::BlurPurifier: return "blur-purifier";
        case AttackFamily::NoisePurifier: return "noise-purifier";
    }
    return "?";
}

AttackFamily attack_family_from_string(const std::string& s) {
    if (s == "paired-restorer") return AttackFamily::PairedRestorer;
    if (s == "blur-purifier") return AttackFamily::BlurPurifier;
    if (s == "noise-purifier") return AttackFamily::NoisePurifier;
    throw std::invalid_argument("unknown attack family '" + s + "'");
}

void AttackConfig::validate() const {
    if (batch_size < 1 || epochs < 1 || decay_every < 1 || width < 1)
        throw std::invalid_argument("attack schedule counts must be positive");
    if (!(lr > 0.0) || !(decay > 0.0)) throw std::invalid_argument("attack learning rate and decay must be positive");
    if (!(lambda_l2 >= 0.0) || !(strength >= 0.0)) throw std::invalid_argument("attack lambda_l2 and strength must be >= 0");
}

namespace {

PairedAttacker fit_restorer(const Tensor& Z, const Tensor& X, const AttackConfig& cfg, const std::string& prefix) {
    cfg.validate();
    if (Z.rank() != 4 || Z.dim(0) == 0) throw std::invalid_argument("paired attacker: no training pairs");
    if (!Z.same_shape(X)) throw std::invalid_argument("paired attacker: z and x batches differ in shape");
    Rng init(cfg.seed, 11);
    PairedAttacker out{Restorer(cfg.width, init, prefix), {}};
    Adam opt(out.net.params, AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
    Rng order(cfg.seed, 12);
    const int n = Z.dim(0);
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        opt.set_lr(cfg.lr * std::pow(cfg.decay, ep / cfg.decay_every));
        const std::vector<int> perm = order.permutation(n);
        double total = 0.0;
        int batches = 0;
        for (int b = 0; b < n; b += cfg.batch_size) {
            std::vector<int> idx(perm.begin() + b, perm.begin() + std::min(n, b + cfg.batch_size));
            Var z(take_rows(Z, idx)), x(take_rows(X, idx));
            out.net.params.zero_grad();
            Var loss = rev_loss(x, out.net(z), cfg.lambda_l2, Reduction::Mean);
            backward(loss);
            opt.step(out.net.params);
            total += loss.value()[0];
            ++batches;
        }
        out.epoch_loss.push_back(total / batches);
    }
    return out;
}

}  // namespace

PairedAttacker build_paired_attacker(const Tensor& Z, const Tensor& X, const AttackConfig& cfg) {
    return fit_restorer(Z, X, cfg, "attacker");
}

PairedAttacker build_paired_attacker(const std::vector<std::pair<Tensor, Tensor>>& pairs, const AttackConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("paired attacker: no training pairs");
    std::vector<Tensor> zs, xs;
    for (const auto& [z, x] : pairs) {
        if (!z.same_shape(pairs[0].first) || !x.same_shape(z))
            throw std::invalid_argument("paired attacker: pair shapes are not uniform");
        zs.push_back(z);
        xs.push_back(x);
    }
    return build_paired_attacker(Tensor::stack(zs), Tensor::stack(xs), cfg);
}

std::vector<double> gaussian_taps(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_taps: sigma must be positive");
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> g(static_cast<std::size_t>(2 * r + 1));
    double s = 0.0;
    for (int i = -r; i <= r; ++i) s += g[static_cast<std::size_t>(i + r)] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    for (double& v : g) v /= s;
    return g;
}

Tensor gaussian_blur(const Tensor& x, double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
    if (sigma == 0.0) return x;
    if (x.rank() < 2) throw std::invalid_argument("gaussian_blur: need at least two spatial dimensions");
    const std::vector<double> g = gaussian_taps(sigma);
    const int r = static_cast<int>(g.size() / 2);
    const int H = x.dim(x.rank() - 2), W = x.dim(x.rank() - 1);
    const std::size_t planes = x.size() / static_cast<std::size_t>(H * W);
    Tensor tmp(x.shape()), out(x.shape());
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = x.data() + p * H * W;
        double* t = tmp.data() + p * H * W;
        double* o = out.data() + p * H * W;
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                double s = 0.0;
                for (int k = -r; k <= r; ++k) s += g[static_cast<std::size_t>(k + r)] * src[h * W + std::clamp(w + k, 0, W - 1)];
                t[h * W + w] = s;
            }
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                double s = 0.0;
                for (int k = -r; k <= r; ++k) s += g[static_cast<std::size_t>(k + r)] * t[std::clamp(h + k, 0, H - 1) * W + w];
                o[h * W + w] = s;
            }
    }
    return out;
}

namespace {

Tensor add_noise(const Tensor& x, double sigma, Rng& rng) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::clamp(x[i] + sigma * rng.normal(), -1.0, 1.0);
    return y;
}

}  // namespace

PairedAttacker train_denoiser(const Tensor& clean, double noise_sigma, const AttackConfig& cfg) {
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("train_denoiser: negative noise level");
    Rng rng(cfg.seed, 13);
    return fit_restorer(add_noise(clean, noise_sigma, rng), clean, cfg, "denoiser");
}

Tensor purify(const Tensor& x, AttackFamily family, double strength, const Restorer* denoiser, std::uint64_t seed) {
    if (!(strength >= 0.0)) throw std::invalid_argument("purify: strength must be >= 0");
    if (family == AttackFamily::PairedRestorer) throw std::invalid_argument("purify: paired-restorer is not a purifier");
    if (strength == 0.0) return x;
    if (family == AttackFamily::BlurPurifier) return gaussian_blur(x, strength);
    if (!denoiser) throw std::invalid_argument("purify: noise-purifier needs a trained denoiser");
    Rng rng(seed, 14);
    const Tensor noisy = add_noise(x, strength, rng);
    NoGradGuard ng;
    if (noisy.rank() == 3) return restore(noisy, *denoiser);
    return (*denoiser)(Var(noisy)).value();
}

}  // namespace arfp
