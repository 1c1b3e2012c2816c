#include "arfp/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace arfp {

Adam::Adam(const ParamSet& params, AdamConfig cfg) : cfg_(cfg) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_.emplace_back(params.var(i).shape(), 0.0);
        v_.emplace_back(params.var(i).shape(), 0.0);
    }
}

void Adam::step(ParamSet& params) {
    if (params.size() != m_.size()) throw std::invalid_argument("Adam: parameter group changed size");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Var& p = params.var(i);
        const Tensor& g = p.grad();
        const bool has = g.size() == p.value().size();
        Tensor& m = m_[i];
        Tensor& v = v_[i];
        Tensor& w = p.mutable_value();
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = has ? g[j] : 0.0;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            w[j] -= cfg_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
        }
    }
}

std::uint64_t Adam::hash() const {
    std::uint64_t h = fnv1a(&t_, sizeof t_);
    for (const Tensor& t : m_) h = hash_tensor(t, h);
    for (const Tensor& t : v_) h = hash_tensor(t, h);
    return h;
}

}  // namespace arfp
