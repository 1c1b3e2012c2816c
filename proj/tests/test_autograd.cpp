#include <gtest/gtest.h>

#include <functional>

#include "arfp/autograd.hpp"
#include "arfp/optim.hpp"
#include "support.hpp"

using namespace arfp;
using arfp::test::random_tensor;

namespace {

// Gradient of sum(f(inputs) * weights) checked against central differences on every input.
double op_grad_error(std::vector<Tensor> inputs, const std::function<Var(const std::vector<Var>&)>& f,
                     std::uint64_t seed = 1) {
    ParamSet ps;
    for (std::size_t i = 0; i < inputs.size(); ++i) ps.add("in" + std::to_string(i), inputs[i]);
    auto vars = [&] {
        std::vector<Var> v;
        for (std::size_t i = 0; i < ps.size(); ++i) v.push_back(ps.var(i));
        return v;
    };
    Tensor w;
    {
        NoGradGuard ng;
        Rng rng(seed);
        w = random_tensor(f(vars()).shape(), rng, -1.0, 1.0);
    }
    auto loss = [&] { return sum(mul(f(vars()), Var(w))); };
    ps.zero_grad();
    backward(loss());
    return arfp::test::finite_difference({&ps}, [&] {
               NoGradGuard ng;
               return loss().value()[0];
           }).rel_error;
}

}  // namespace

TEST(AutogradOps, ElementwiseGradients) {
    Rng rng(1);
    const Tensor a = random_tensor({2, 3}, rng), b = random_tensor({2, 3}, rng);
    EXPECT_LT(op_grad_error({a, b}, [](auto& v) { return mul(add(v[0], v[1]), sub(v[0], v[1])); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return tanh(scale(v[0], 2.0)); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return sin(add_scalar(v[0], 0.3)); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return square(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return leaky_relu(v[0], 0.2); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return clamp(scale(v[0], 2.0), -1.0, 1.0); }), 1e-7);
}

TEST(AutogradOps, Conv2dGradients) {
    Rng rng(2);
    const Tensor x = random_tensor({2, 3, 6, 6}, rng), w = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
    EXPECT_LT(op_grad_error({x, w, b}, [](auto& v) { return conv2d(v[0], v[1], v[2], 1, 1); }), 1e-7);
    EXPECT_LT(op_grad_error({x, w, b}, [](auto& v) { return conv2d(v[0], v[1], v[2], 2, 1); }), 1e-7);
}

TEST(AutogradOps, Conv2dHandExample) {
    // 1x1 input channel, 3x3 all-ones kernel, zero padding: centre sums its neighbourhood.
    const Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    NoGradGuard ng;
    const Tensor y = conv2d(Var(x), Var(Tensor({1, 1, 3, 3}, 1.0)), Var(Tensor({1}, 0.5)), 1, 1).value();
    EXPECT_EQ(y.at(0, 0, 1, 1), 45.5);
    EXPECT_EQ(y.at(0, 0, 0, 0), 1 + 2 + 4 + 5 + 0.5);
}

TEST(AutogradOps, LinearFilmAndShapeOps) {
    Rng rng(3);
    const Tensor x = random_tensor({3, 5}, rng), w = random_tensor({4, 5}, rng), b = random_tensor({4}, rng);
    EXPECT_LT(op_grad_error({x, w, b}, [](auto& v) { return linear(v[0], v[1], v[2]); }), 1e-7);
    const Tensor f = random_tensor({2, 3, 4, 4}, rng), g = random_tensor({2, 3}, rng), be = random_tensor({2, 3}, rng);
    EXPECT_LT(op_grad_error({f, g, be}, [](auto& v) { return film(v[0], v[1], v[2]); }), 1e-7);
    EXPECT_LT(op_grad_error({f}, [](auto& v) { return upsample_nearest2x(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({f}, [](auto& v) { return avg_pool2x(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({f}, [](auto& v) { return resize_bilinear(v[0], 7, 5); }), 1e-7);
    EXPECT_LT(op_grad_error({x, x}, [](auto& v) { return concat(v[0], v[1]); }), 1e-7);
    EXPECT_LT(op_grad_error({x}, [](auto& v) { return slice_cols(v[0], 1, 3); }), 1e-7);
    EXPECT_LT(op_grad_error({x}, [](auto& v) { return take_rows(v[0], {2, 0, 2}); }), 1e-7);
    EXPECT_LT(op_grad_error({random_tensor({2, 1, 3, 3}, rng)}, [](auto& v) { return repeat_channels(v[0], 3); }),
              1e-7);
}

TEST(AutogradOps, ReductionsCosineAndCrossEntropy) {
    Rng rng(4);
    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    EXPECT_LT(op_grad_error({a, b}, [](auto& v) { return cosine_rows(v[0], v[1]); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return mean_per_sample(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return sum_per_sample(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return mean(v[0]); }), 1e-7);
    EXPECT_LT(op_grad_error({a}, [](auto& v) { return cross_entropy(v[0], {1, 0, 3}); }), 1e-7);
}

TEST(Autograd, CosineAndCrossEntropyValues) {
    NoGradGuard ng;
    const Var a(Tensor({1, 2}, {1.0, 0.0})), b(Tensor({1, 2}, {1.0, 1.0}));
    EXPECT_NEAR(cosine_rows(a, b).value()[0], std::sqrt(0.5), 1e-12);
    const Var logits(Tensor({1, 2}, {0.0, 0.0}));
    EXPECT_NEAR(cross_entropy(logits, {1}).value()[0], std::log(2.0), 1e-12);
}

TEST(Autograd, NoGradGuardStopsGraphConstruction) {
    Var x(Tensor({2}, {1.0, 2.0}), true);
    {
        NoGradGuard ng;
        Var y = square(x);
        EXPECT_FALSE(y.requires_grad());
    }
    Var y = square(x);
    EXPECT_TRUE(y.requires_grad());
    backward(sum(y));
    EXPECT_EQ(x.grad().vec(), (std::vector<double>{2.0, 4.0}));
    Var d = detach(y);
    EXPECT_FALSE(d.requires_grad());
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
    Var x(Tensor({1}, {3.0}), true);
    backward(add(mul(x, x), x));
    EXPECT_EQ(x.grad()[0], 7.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamSet ps;
    Var p = ps.add("p", Tensor({2}, {1.0, -1.0}));
    p.mutable_grad() = Tensor({2}, {0.5, -2.0});
    Adam opt(ps, AdamConfig{0.1, 0.9, 0.999, 1e-12});
    opt.step(ps);
    EXPECT_NEAR(ps.var(0).value()[0], 0.9, 1e-9);
    EXPECT_NEAR(ps.var(0).value()[1], -0.9, 1e-9);
}

TEST(Tensor, StackSampleAndTakeRows) {
    const Tensor a({1, 2}, {1, 2}), b({1, 2}, {3, 4});
    const Tensor s = Tensor::stack({a, b});
    EXPECT_EQ(s.shape(), (Shape{2, 2}));
    EXPECT_EQ(s.sample(1).vec(), b.vec());
    EXPECT_EQ(take_rows(s, {1, 1, 0}).vec(), (std::vector<double>{3, 4, 3, 4, 1, 2}));
    EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0}), std::invalid_argument);
    EXPECT_NE(hash_tensor(a), hash_tensor(b));
}
