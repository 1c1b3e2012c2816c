#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "arfp/adversary.hpp"
#include "support.hpp"

using namespace arfp;
using arfp::test::random_tensor;

TEST(RevLoss, MatchesScalarRecomputation) {
    const Tensor x({1, 1, 1, 3}, {0.5, -0.5, 0.0}), xt({1, 1, 1, 3}, {0.0, 0.5, 0.25});
    // L1 = 0.5 + 1 + 0.25; L2^2 = 0.25 + 1 + 0.0625
    EXPECT_NEAR(rev_loss(x, xt, 0.5), 1.75 + 0.5 * 1.3125, 1e-12);
    EXPECT_NEAR(rev_loss(x, xt, 0.0), 1.75, 1e-12);
    EXPECT_EQ(rev_loss(x, x), 0.0);
    EXPECT_THROW(rev_loss(x, Tensor({3})), std::invalid_argument);
    EXPECT_THROW(rev_loss(x, xt, -1.0), std::invalid_argument);
}

TEST(RevLoss, DifferentiableFormAgreesWithTensorForm) {
    Rng rng(1);
    const Tensor x = random_tensor({2, 3, 4, 4}, rng), xt = random_tensor({2, 3, 4, 4}, rng);
    NoGradGuard ng;
    const double sum = rev_loss(Var(x), Var(xt), 0.5, Reduction::Sum).value()[0];
    const double mean = rev_loss(Var(x), Var(xt), 0.5, Reduction::Mean).value()[0];
    EXPECT_NEAR(sum, rev_loss(x, xt, 0.5), 1e-12);
    EXPECT_NEAR(mean * static_cast<double>(x.size()), sum, 1e-9);
}

TEST(Restorer, FreshNetworkIsIdentity) {
    Rng rng(2);
    Restorer a(4, rng);
    const Tensor z = random_tensor({3, 8, 8}, rng);
    EXPECT_EQ(restore(z, a).vec(), z.vec());
    EXPECT_THROW(restore(Tensor({3, 7, 8}), a), std::invalid_argument);
}

TEST(AttackFamily, StringRoundTrip) {
    for (AttackFamily f : {AttackFamily::PairedRestorer, AttackFamily::BlurPurifier, AttackFamily::NoisePurifier})
        EXPECT_EQ(attack_family_from_string(to_string(f)), f);
    EXPECT_EQ(to_string(AttackFamily::BlurPurifier), "blur-purifier");
    EXPECT_THROW(attack_family_from_string("diffusion"), std::invalid_argument);
}

TEST(Blur, TapsAreNormalizedSymmetricWithRadiusThreeSigma) {
    for (double sigma : {0.5, 1.0, 2.3}) {
        const auto t = gaussian_taps(sigma);
        EXPECT_EQ(static_cast<int>(t.size()), 2 * static_cast<int>(std::ceil(3 * sigma)) + 1);
        EXPECT_NEAR(std::accumulate(t.begin(), t.end(), 0.0), 1.0, 1e-12);
        for (std::size_t i = 0; i < t.size(); ++i) EXPECT_DOUBLE_EQ(t[i], t[t.size() - 1 - i]);
    }
    EXPECT_THROW(gaussian_taps(0.0), std::invalid_argument);
}

TEST(Blur, ZeroSigmaIdentityAndConstantsPreserved) {
    Rng rng(3);
    const Tensor x = random_tensor({3, 8, 8}, rng);
    EXPECT_EQ(gaussian_blur(x, 0.0).vec(), x.vec());
    const Tensor c({3, 8, 8}, 0.3);
    const Tensor blurred = gaussian_blur(c, 1.5);
    for (double v : blurred.vec()) EXPECT_NEAR(v, 0.3, 1e-12);
}

TEST(Blur, ReducesVarianceOfNoise) {
    Rng rng(4);
    const Tensor x = random_tensor({1, 16, 16}, rng);
    auto var = [](const Tensor& t) {
        double m = 0, s = 0;
        for (double v : t.vec()) m += v;
        m /= static_cast<double>(t.size());
        for (double v : t.vec()) s += (v - m) * (v - m);
        return s / static_cast<double>(t.size());
    };
    EXPECT_LT(var(gaussian_blur(x, 1.0)), 0.5 * var(x));
}

TEST(Purify, StrengthZeroIsIdentityAndErrorsAreReported) {
    Rng rng(5);
    const Tensor x = random_tensor({3, 8, 8}, rng);
    EXPECT_EQ(purify(x, AttackFamily::BlurPurifier, 0.0).vec(), x.vec());
    EXPECT_THROW(purify(x, AttackFamily::BlurPurifier, -1.0), std::invalid_argument);
    EXPECT_THROW(purify(x, AttackFamily::PairedRestorer, 1.0), std::invalid_argument);
    EXPECT_THROW(purify(x, AttackFamily::NoisePurifier, 0.1), std::invalid_argument);
}

TEST(PairedAttacker, LearnsAFixedPerturbation) {
    Rng rng(6);
    const Tensor X = random_tensor({8, 3, 8, 8}, rng, -0.5, 0.5);
    Tensor Z = X;
    for (std::size_t i = 0; i < Z.size(); ++i) Z[i] += 0.2;
    AttackConfig cfg;
    cfg.width = 4;
    cfg.epochs = 40;
    cfg.batch_size = 4;
    cfg.lr = 3e-3;
    const PairedAttacker a = build_paired_attacker(Z, X, cfg);
    ASSERT_EQ(a.epoch_loss.size(), 40u);
    EXPECT_LT(a.epoch_loss.back(), 0.5 * a.epoch_loss.front());
    EXPECT_THROW(build_paired_attacker(Z, Tensor({8, 3, 8, 6}), cfg), std::invalid_argument);
}

TEST(PairedAttacker, DeterministicForFixedSeed) {
    Rng rng(7);
    const Tensor X = random_tensor({4, 3, 8, 8}, rng, -0.5, 0.5), Z = random_tensor({4, 3, 8, 8}, rng, -0.5, 0.5);
    AttackConfig cfg;
    cfg.width = 2;
    cfg.epochs = 3;
    cfg.batch_size = 2;
    EXPECT_EQ(build_paired_attacker(Z, X, cfg).net.params.hash(), build_paired_attacker(Z, X, cfg).net.params.hash());
}
