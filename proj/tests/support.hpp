#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "arfp/autograd.hpp"
#include "arfp/condnet.hpp"
#include "arfp/nn.hpp"
#include "arfp/rng.hpp"

namespace arfp::test {

// Small enough for exhaustive finite-difference checks.
inline ArchConfig tiny_arch() {
    ArchConfig a;
    a.image_size = 16;
    a.key_bits = 16;
    a.nonce_bits = 8;
    a.embed_dim = 8;
    a.width = 2;
    a.global_dim = 4;
    a.decoder_channels = 1;
    a.adversary_width = 2;
    a.embedder_dim = 8;
    return a;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -0.9, double hi = 0.9) {
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

inline Bits random_bits(int n, Rng& rng) {
    Bits b(static_cast<std::size_t>(n));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.below(2));
    return b;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

struct GradCheck {
    double rel_error = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
    std::size_t checked = 0;
};

// Central differences over every scalar of the given parameter sets. The
// analytic gradient must already be stored in the parameters' grad buffers.
inline GradCheck finite_difference(const std::vector<ParamSet*>& sets, const std::function<double()>& loss,
                                   double h = 1e-6) {
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    GradCheck r;
    for (ParamSet* ps : sets)
        for (std::size_t i = 0; i < ps->size(); ++i) {
            Var& v = ps->var(i);
            const Tensor analytic = v.grad().empty() ? Tensor(v.shape()) : v.grad();
            Tensor& val = v.mutable_value();
            for (std::size_t k = 0; k < val.size(); ++k) {
                const double keep = val[k];
                val[k] = keep + h;
                const double up = loss();
                val[k] = keep - h;
                const double down = loss();
                val[k] = keep;
                const double num = (up - down) / (2 * h);
                diff2 += (analytic[k] - num) * (analytic[k] - num);
                a2 += analytic[k] * analytic[k];
                n2 += num * num;
                ++r.checked;
            }
        }
    const double denom = std::max(std::sqrt(std::max(a2, n2)), 1e-12);
    r.rel_error = std::sqrt(diff2) / denom;
    return r;
}

}  // namespace arfp::test
