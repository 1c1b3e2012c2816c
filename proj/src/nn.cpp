#include "arfp/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace arfp {

Var ParamSet::add(const std::string& name, Tensor init) {
    for (const auto& [n, v] : entries_)
        if (n == name) throw std::invalid_argument("duplicate parameter name: " + name);
    Var v(std::move(init), true);
    entries_.emplace_back(name, v);
    return v;
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.second.value().size();
    return n;
}

Var* ParamSet::find(const std::string& name) {
    for (auto& e : entries_)
        if (e.first == name) return &e.second;
    return nullptr;
}

void ParamSet::zero_grad() {
    for (auto& e : entries_) e.second.zero_grad();
}

std::uint64_t ParamSet::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& [n, v] : entries_) {
        h = fnv1a(n.data(), n.size(), h);
        h = hash_tensor(v.value(), h);
    }
    return h;
}

void ParamSet::copy_from(const ParamSet& other) {
    if (other.size() != size()) throw std::invalid_argument("parameter set layout mismatch");
    for (std::size_t i = 0; i < size(); ++i) {
        if (other.name(i) != name(i) || other.var(i).shape() != var(i).shape())
            throw std::invalid_argument("parameter mismatch at " + name(i));
        entries_[i].second.mutable_value() = other.var(i).value();
    }
}

std::uint64_t hash_params(const std::vector<const ParamSet*>& sets) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const ParamSet* s : sets) {
        const std::uint64_t sh = s->hash();
        h = fnv1a(&sh, sizeof sh, h);
    }
    return h;
}

namespace {
Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}
}  // namespace

Conv2d::Conv2d(ParamSet& ps, const std::string& name, int in, int out, int k, int stride_, int pad_, Rng& rng)
    : stride(stride_), pad(pad_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * k * k));
    w = ps.add(name + ".w", uniform_tensor({out, in, k, k}, bound, rng));
    b = ps.add(name + ".b", uniform_tensor({out}, bound, rng));
}

void Conv2d::zero_init() {
    w.mutable_value().fill(0.0);
    b.mutable_value().fill(0.0);
}

Linear::Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    w = ps.add(name + ".w", uniform_tensor({out, in}, bound, rng));
    b = ps.add(name + ".b", uniform_tensor({out}, bound, rng));
}

void Linear::normal_init(Rng& rng, double stddev, double bias_fill) {
    Tensor& wv = w.mutable_value();
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] = rng.normal(0.0, stddev);
    b.mutable_value().fill(bias_fill);
}

ModulationHead::ModulationHead(ParamSet& ps, const std::string& name, int embed_dim, int channels, Rng& rng,
                               double init_std) {
    g = Linear(ps, name + ".gamma", embed_dim, channels, rng);
    b = Linear(ps, name + ".beta", embed_dim, channels, rng);
    g.normal_init(rng, init_std);
    b.normal_init(rng, init_std);
}

std::pair<Var, Var> ModulationHead::gamma_beta(const Var& e) const {
    return {add_scalar(g(e), 1.0), b(e)};
}

Var ModulationHead::operator()(const Var& f, const Var& e) const {
    auto [gamma, beta] = gamma_beta(e);
    return film(f, gamma, beta);
}

}  // namespace arfp
