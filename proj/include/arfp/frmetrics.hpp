#pragma once

// Toy face embedder, closed-set identification, protection success rate and
// image quality metrics (PSNR, SSIM in the [0,1] pixel domain).

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "arfp/nn.hpp"

namespace arfp {

struct EmbedderConfig {
    int embed_dim = 128;
    int epochs = 40;
    int batch_size = 16;
    double lr = 1e-3;
    std::uint64_t seed = 0;
};

// Three conv(3x3)+ReLU+avgpool stages (16, 32, 32 channels), then a linear
// embedding layer and a linear identity classifier on ReLU(embedding).
class ToyEmbedder {
public:
    ToyEmbedder(int image_size, int classes, int embed_dim, Rng& rng);
    ToyEmbedder(const ToyEmbedder&) = delete;
    ToyEmbedder& operator=(const ToyEmbedder&) = delete;
    ToyEmbedder(ToyEmbedder&&) = default;

    Var features(const Var& x) const;  // [N,3,S,S] -> [N,d], not normalized
    Var logits(const Var& x) const;
    int image_size() const { return size_; }
    int classes() const { return classes_; }
    int embed_dim() const { return dim_; }

    ParamSet params;
    Conv2d c1, c2, c3;
    Linear fc, cls;

private:
    int size_, classes_, dim_;
};

// images [N,3,S,S] in [-1,1]; labels are identity ids (any non-negative ints).
// Needs at least two identities with at least two images each.
ToyEmbedder train_toy_embedder(const Tensor& images, const std::vector<int>& labels, const EmbedderConfig& cfg);

struct Embedding {
    std::vector<double> h;  // unit norm
};

Embedding embed(const Tensor& x, const ToyEmbedder& phi);
// Batched: one embedding per row of [N,3,S,S].
std::vector<Embedding> embed_batch(const Tensor& x, const ToyEmbedder& phi);
double cosine_sim(const Embedding& a, const Embedding& b);

struct Gallery {
    std::map<int, std::vector<Embedding>> refs;  // label -> reference embeddings
    void add(int label, Embedding e) { refs[label].push_back(std::move(e)); }
    bool empty() const { return refs.empty(); }
};

Gallery build_gallery(const Tensor& images, const std::vector<int>& labels, const ToyEmbedder& phi);

// Label whose best reference has the highest cosine; ties go to the lowest label.
int identify(const Embedding& probe, const Gallery& gallery);
// Best cosine between the probe and any reference of one label.
double best_similarity(const Embedding& probe, const Gallery& gallery, int label);

enum class PsrMode {
    ClosedSet,     // recognized when identify() returns the true label
    Verification,  // recognized when similarity to the true label's references >= threshold
};

struct PsrConfig {
    PsrMode mode = PsrMode::ClosedSet;
    double threshold = 0.5;
};

// 100 * (1 - recognized fraction).
double psr(const Tensor& probes, const std::vector<int>& labels, const Gallery& gallery, const ToyEmbedder& phi,
           const PsrConfig& cfg = {});
double psr_from_accuracy(double accuracy_percent);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

// Images in [-1,1] are mapped to [0,1] first; peak 1. Identical inputs give kPsnrIdentical.
double psnr(const Tensor& a, const Tensor& b);
// Mean local SSIM, 11x11 Gaussian window (sigma 1.5, valid region), C1=(0.01)^2,
// C2=(0.03)^2 in the [0,1] domain, averaged over channels. a and b are [C,H,W].
double ssim(const Tensor& a, const Tensor& b);

// Per-image metric averaged over a batch [N,3,H,W].
double mean_psnr(const Tensor& a, const Tensor& b);
double mean_ssim(const Tensor& a, const Tensor& b);

}  // namespace arfp
