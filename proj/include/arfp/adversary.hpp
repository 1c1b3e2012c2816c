#pragma once

// Key-blind restoration adversary: the training-time surrogate A, the post-hoc
// paired attacker, and the blur / noise purifiers.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arfp/nn.hpp"

namespace arfp {

// Small U-shaped restorer: two scales, one skip connection, residual output
// clamp(z + o(z)) with o zero-initialized so a fresh network is the identity.
// Fully convolutional; spatial size must be even.
class Restorer {
public:
    Restorer(int width, Rng& rng, const std::string& prefix = "adv");
    Restorer(const Restorer&) = delete;
    Restorer& operator=(const Restorer&) = delete;
    Restorer(Restorer&&) = default;

    Var operator()(const Var& z) const;
    int width() const { return width_; }

    ParamSet params;
    Conv2d c1, c2, c3, c4, o;

private:
    int width_;
};

// x~ = A(z) for a single image [3,H,W] in [-1,1]. No key or nonce input.
Tensor restore(const Tensor& z, const Restorer& a);

inline constexpr double kDefaultLambdaL2 = 0.5;

// ||x - x~||_1 + lambda_l2 * ||x - x~||_2^2 (sums over all elements).
double rev_loss(const Tensor& x, const Tensor& x_tilde, double lambda_l2 = kDefaultLambdaL2);
// Differentiable form. Mean reduction divides both terms by the element count.
Var rev_loss(const Var& x, const Var& x_tilde, double lambda_l2, Reduction red);

enum class AttackFamily { PairedRestorer, BlurPurifier, NoisePurifier };
std::string to_string(AttackFamily f);
AttackFamily attack_family_from_string(const std::string& s);

struct AttackConfig {
    AttackFamily family = AttackFamily::PairedRestorer;
    int batch_size = 32;
    double lr = 1e-4;
    double decay = 0.95;
    int decay_every = 10;  // epochs
    int epochs = 60;
    std::uint64_t seed = 0;
    int width = 16;
    double lambda_l2 = kDefaultLambdaL2;
    double strength = 1.0;  // purifier sigma (blur) or noise stddev in pixel units of [-1,1]

    void validate() const;
};

struct PairedAttacker {
    Restorer net;
    std::vector<double> epoch_loss;  // mean per-batch rev_loss (mean reduction) of each epoch
};

// Trains a fresh restorer on (z, x) pairs. Z and X are [N,3,H,W] batches.
PairedAttacker build_paired_attacker(const Tensor& Z, const Tensor& X, const AttackConfig& cfg);
PairedAttacker build_paired_attacker(const std::vector<std::pair<Tensor, Tensor>>& pairs, const AttackConfig& cfg);

// Normalized 1-D Gaussian taps of radius ceil(3 sigma).
std::vector<double> gaussian_taps(double sigma);
// Separable Gaussian blur with replicate borders; sigma 0 returns the input.
Tensor gaussian_blur(const Tensor& x, double sigma);

// Denoiser for the noise purifier: a restorer trained on clean images only,
// mapping clean + N(0, sigma^2) back to clean.
PairedAttacker train_denoiser(const Tensor& clean, double noise_sigma, const AttackConfig& cfg);

// Blur: Gaussian blur with sigma = strength. Noise: add N(0, strength^2) then
// apply the denoiser (required for that family). Strength 0 is the identity.
// x may be a single image or a batch.
Tensor purify(const Tensor& x, AttackFamily family, double strength, const Restorer* denoiser = nullptr,
              std::uint64_t seed = 0);

}  // namespace arfp
