#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

#include "arfp/condnet.hpp"
#include "support.hpp"

using namespace arfp;
using arfp::test::random_tensor;
using arfp::test::tiny_arch;

TEST(ArchConfig, ValidationAndJsonRoundTrip) {
    ArchConfig a = tiny_arch();
    EXPECT_NO_THROW(a.validate());
    const ArchConfig b = ArchConfig::from_json(a.to_json());
    EXPECT_EQ(b.to_json(), a.to_json());
    a.image_size = 20;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = tiny_arch();
    a.embed_dim = 7;
    EXPECT_THROW(a.validate(), std::invalid_argument);
    a = tiny_arch();
    a.carrier_share = 1.0;
    EXPECT_THROW(a.validate(), std::invalid_argument);
}

TEST(Kmb, UnitGammaZeroBetaIsExactIdentity) {
    Rng rng(1);
    const Tensor f = random_tensor({4, 5, 6}, rng, -3.0, 3.0);
    const Tensor out = kmb_modulate(f, std::vector<double>(4, 1.0), std::vector<double>(4, 0.0));
    ASSERT_TRUE(out.same_shape(f));
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(out[i], f[i]);
}

TEST(Kmb, ChannelwiseAffineHandExample) {
    const Tensor f({2, 1, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor out = kmb_modulate(f, {2.0, -1.0}, {0.5, 1.0});
    EXPECT_EQ(out.vec(), (std::vector<double>{2.5, 4.5, -2.0, -3.0}));
}

TEST(Kmb, BatchedModulationUsesPerSampleParameters) {
    const Tensor f({2, 1, 1, 2}, {1.0, 2.0, 1.0, 2.0});
    const Tensor out = kmb_modulate(f, {1.0, 3.0}, {0.0, -1.0});
    EXPECT_EQ(out.vec(), (std::vector<double>{1.0, 2.0, 2.0, 5.0}));
}

TEST(Kmb, LengthMismatchThrows) {
    const Tensor f({3, 2, 2});
    EXPECT_THROW(kmb_modulate(f, {1.0, 1.0}, {0.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(kmb_modulate(Tensor({4}), {1.0}, {0.0}), std::invalid_argument);
}

TEST(Kmb, ZeroHeadGivesIdentityModulation) {
    Rng rng(2);
    ParamSet ps;
    ModulationHead head(ps, "h", 8, 3, rng, 0.01);
    head.g.w.mutable_value().fill(0.0);
    head.g.b.mutable_value().fill(0.0);
    head.b.w.mutable_value().fill(0.0);
    head.b.b.mutable_value().fill(0.0);
    const Tensor f = random_tensor({3, 4, 4}, rng);
    ConditionEmbedding e{std::vector<double>(8, 0.7)};
    const Tensor out = kmb_modulate(f, e, head);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(out[i], f[i]);
}

class ProtectorTest : public ::testing::Test {
protected:
    ArchConfig arch = tiny_arch();
    Protector p{arch, 3};
    Rng rng{4};
    Tensor x = random_tensor({3, 16, 16}, rng);
    SecretKey k = generate_key(1, 16);
    Nonce m = generate_nonce(2, 8);
};

TEST_F(ProtectorTest, ZeroAlphaReturnsInputBitExactly) {
    const ProtectedImage z = protect(x, k, m, 0.0, p);
    ASSERT_TRUE(z.z.same_shape(x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(z.z[i], x[i]);
    EXPECT_EQ(z.nonce_id, to_hex(m.bits));
    EXPECT_EQ(z.key_fingerprint, fingerprint(k.bits));
}

TEST_F(ProtectorTest, MaskIsBoundedAndPerturbationLinearBeforeClamp) {
    const Tensor d = generate_mask(x, k, m, p);
    for (double v : d.vec()) EXPECT_LE(std::fabs(v), 1.0);
    // Keep x away from the clamp boundary so z - x = alpha * d exactly.
    Tensor xs = x;
    for (auto& v : xs.vec()) v *= 0.5;
    const Tensor ds = generate_mask(xs, k, m, p);
    for (double a : {0.01, 0.05, 0.15}) {
        const ProtectedImage z = protect(xs, k, m, a, p);
        for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_NEAR(z.z[i] - xs[i], a * ds[i], 1e-12);
    }
}

TEST_F(ProtectorTest, OutputStaysInPixelRange) {
    Tensor xe(x.shape());
    for (std::size_t i = 0; i < xe.size(); ++i) xe[i] = i % 2 ? 1.0 : -1.0;
    const ProtectedImage z = protect(xe, k, m, 0.5, p);
    for (double v : z.z.vec()) {
        EXPECT_GE(v, -1.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST_F(ProtectorTest, InvalidInputsThrow) {
    EXPECT_THROW(protect(x, k, m, -0.1, p), std::invalid_argument);
    EXPECT_THROW(protect(Tensor({3, 8, 8}), k, m, 0.05, p), std::invalid_argument);
    Tensor bad = x;
    bad[0] = 1.5;
    EXPECT_THROW(protect(bad, k, m, 0.05, p), std::invalid_argument);
    EXPECT_THROW(protect(x, generate_key(1, 12), m, 0.05, p), std::invalid_argument);
    EXPECT_THROW(protect(x, k, generate_nonce(1, 5), 0.05, p), std::invalid_argument);
}

TEST_F(ProtectorTest, DifferentKeysGiveDifferentMasks) {
    const Tensor a = generate_mask(x, k, m, p);
    const Tensor b = generate_mask(x, perturb_key(k, 1, 9), m, p);
    EXPECT_GT(arfp::test::max_abs_diff(a, b), 1e-6);
}

TEST_F(ProtectorTest, KeyFeaturesOffRemovesKeyDependence) {
    const Var km = Var(signal_batch({k.bits})), kw = Var(signal_batch({perturb_key(k, 3, 1).bits}));
    const Var mm = Var(signal_batch({m.bits}));
    NoGradGuard ng;
    const Tensor e1 = p.enc(km, mm, false).value(), e2 = p.enc(kw, mm, false).value();
    EXPECT_EQ(e1.vec(), e2.vec());
    const Tensor f1 = p.enc(km, mm, true).value(), f2 = p.enc(kw, mm, true).value();
    EXPECT_NE(f1.vec(), f2.vec());
}

TEST_F(ProtectorTest, SameSeedSameParameters) {
    Protector q(arch, 3);
    EXPECT_EQ(q.enc.params.hash(), p.enc.params.hash());
    EXPECT_EQ(q.gen.params.hash(), p.gen.params.hash());
    Protector r(arch, 4);
    EXPECT_NE(r.gen.params.hash(), p.gen.params.hash());
}

TEST(CondImageNet, ZeroedResidualHeadIsIdentity) {
    const ArchConfig arch = tiny_arch();
    Rng rng(5);
    CondImageNet net(arch, CondImageNet::Mode::Residual, rng, "r");
    net.zero_output_head();
    const Tensor x = random_tensor({2, 3, 16, 16}, rng);
    const Tensor e = random_tensor({2, arch.embed_dim}, rng);
    NoGradGuard ng;
    EXPECT_EQ(net(Var(x), Var(e)).value().vec(), x.vec());
}

TEST(CondImageNet, RejectsWrongShapes) {
    const ArchConfig arch = tiny_arch();
    Rng rng(6);
    CondImageNet net(arch, CondImageNet::Mode::Mask, rng, "g");
    NoGradGuard ng;
    EXPECT_THROW(net(Var(Tensor({1, 3, 8, 8})), Var(Tensor({1, arch.embed_dim}))), std::invalid_argument);
    EXPECT_THROW(net(Var(Tensor({1, 3, 16, 16})), Var(Tensor({1, 3}))), std::invalid_argument);
}
