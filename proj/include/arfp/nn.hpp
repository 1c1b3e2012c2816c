#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "arfp/autograd.hpp"
#include "arfp/rng.hpp"

namespace arfp {

// Named, ordered collection of trainable leaves. Order is registration order
// and defines hashing and serialization layout.
class ParamSet {
public:
    Var add(const std::string& name, Tensor init);

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;
    const std::string& name(std::size_t i) const { return entries_[i].first; }
    Var& var(std::size_t i) { return entries_[i].second; }
    const Var& var(std::size_t i) const { return entries_[i].second; }
    Var* find(const std::string& name);

    void zero_grad();
    std::uint64_t hash() const;
    // Copies values from another set with identical names and shapes.
    void copy_from(const ParamSet& other);

private:
    std::vector<std::pair<std::string, Var>> entries_;
};

std::uint64_t hash_params(const std::vector<const ParamSet*>& sets);

// Default initialization draws U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
struct Conv2d {
    Var w, b;
    int stride = 1, pad = 1;
    Conv2d() = default;
    Conv2d(ParamSet& ps, const std::string& name, int in, int out, int k, int stride, int pad, Rng& rng);
    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
    void zero_init();
};

struct Linear {
    Var w, b;
    Linear() = default;
    Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng);
    Var operator()(const Var& x) const { return linear(x, w, b); }
    void normal_init(Rng& rng, double stddev, double bias_fill = 0.0);
};

// Produces per-channel (gamma, beta) from a condition embedding; gamma = 1 + g(e)
// so a zeroed head is the identity modulation.
struct ModulationHead {
    Linear g, b;
    ModulationHead() = default;
    ModulationHead(ParamSet& ps, const std::string& name, int embed_dim, int channels, Rng& rng, double init_std);
    std::pair<Var, Var> gamma_beta(const Var& e) const;
    Var operator()(const Var& f, const Var& e) const;
};

}  // namespace arfp
