#pragma once

#include <cstdint>
#include <vector>

#include "arfp/nn.hpp"

namespace arfp {

struct AdamConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer bound to one parameter group. First and second
// moments live here so a training state can be hashed and checkpointed.
class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& params, AdamConfig cfg);

    // Applies one update from the gradients currently stored on the parameters.
    // Parameters without a gradient are treated as having zero gradient.
    void step(ParamSet& params);

    double lr() const { return cfg_.lr; }
    void set_lr(double lr) { cfg_.lr = lr; }
    long steps() const { return t_; }
    const std::vector<Tensor>& first_moments() const { return m_; }
    const std::vector<Tensor>& second_moments() const { return v_; }
    std::vector<Tensor>& first_moments() { return m_; }
    std::vector<Tensor>& second_moments() { return v_; }
    void set_steps(long t) { t_ = t; }
    std::uint64_t hash() const;

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_, v_;
    long t_ = 0;
};

}  // namespace arfp
