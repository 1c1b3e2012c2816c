#include <gtest/gtest.h>

#include <stdexcept>

#include "arfp/recovery.hpp"
#include "support.hpp"

using namespace arfp;
using arfp::test::random_tensor;
using arfp::test::tiny_arch;

TEST(NonceLoss, MatchesScalarRecomputation) {
    const Nonce m{Bits{1, 0, 1, 1}};
    const std::vector<double> d{0.5, 0.2, -1.0, 2.0};
    // (0.5-1)^2 + (0.2+1)^2 + (-1-1)^2 + (2-1)^2
    EXPECT_NEAR(nonce_loss(d, m), 0.25 + 1.44 + 4.0 + 1.0, 1e-12);
    EXPECT_EQ(nonce_loss({1.0, -1.0}, Nonce{Bits{1, 0}}), 0.0);
    EXPECT_THROW(nonce_loss({1.0}, m), std::invalid_argument);
}

class RecovererTest : public ::testing::Test {
protected:
    ArchConfig arch = tiny_arch();
    Protector p{arch, 1};
    Recoverer r{arch, 1};
    Rng rng{2};
    Tensor z = random_tensor({3, 16, 16}, rng);
};

TEST_F(RecovererTest, FreshRecoveryNetworkIsIdentity) {
    const Tensor x = recover(z, generate_key(1, 16), generate_nonce(1, 8), p.enc, r);
    EXPECT_EQ(x.vec(), z.vec());
}

TEST_F(RecovererTest, ZeroDecoderHeadDecodesAllZeroBits) {
    r.dec.zero_output_head();
    const DecodedNonce d = decode_nonce(z, r);
    for (double v : d.signal) EXPECT_EQ(v, 0.0);
    const Nonce m{Bits{1, 0, 1, 1, 0, 0, 0, 1}};
    EXPECT_DOUBLE_EQ(ber(m.bits, d.bits.bits), 0.5);
    const IntegrityVerdict v = verify_integrity(z, m, r, 0.2, "img");
    EXPECT_FALSE(v.accepted);
    EXPECT_DOUBLE_EQ(v.ber, 0.5);
    EXPECT_EQ(v.to_json()["image_id"], "img");
}

TEST_F(RecovererTest, DefaultPolicyDecodesNonceFirst) {
    const DecodedNonce d = decode_nonce(z, r);
    const SecretKey k = generate_key(3, 16);
    EXPECT_EQ(recover(z, k, p.enc, r).vec(), recover(z, k, d.bits, p.enc, r).vec());
}

TEST_F(RecovererTest, InvalidInputsThrow) {
    EXPECT_THROW(decode_nonce(Tensor({3, 8, 8}), r), std::invalid_argument);
    EXPECT_THROW(verify_integrity(z, generate_nonce(1, 8), r, 0.6), std::invalid_argument);
    EXPECT_THROW(verify_integrity(z, generate_nonce(1, 8), r, 0.0), std::invalid_argument);
}

TEST(Integrity, ThresholdIsInclusive) {
    EXPECT_TRUE(integrity_from_ber(0.2, 0.2).accepted);
    EXPECT_FALSE(integrity_from_ber(0.2001, 0.2).accepted);
    EXPECT_TRUE(integrity_from_ber(0.0, 0.1).accepted);
}

TEST(Splice, CopiesOnlyTheRectangle) {
    const Tensor z({3, 4, 4}, 0.0), donor({3, 4, 4}, 1.0);
    const Rect rect{1, 2, 2, 1};
    const Tensor s = splice(z, donor, rect);
    int ones = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 4; ++y)
            for (int x = 0; x < 4; ++x) {
                const bool inside = y >= 1 && y < 3 && x == 2;
                EXPECT_EQ(s[static_cast<std::size_t>(c * 16 + y * 4 + x)], inside ? 1.0 : 0.0);
                ones += inside;
            }
    EXPECT_EQ(ones, 6);
    EXPECT_THROW(splice(z, donor, Rect{3, 3, 2, 2}), std::invalid_argument);
    EXPECT_THROW(splice(z, Tensor({3, 4, 5}), rect), std::invalid_argument);
}

TEST(Splice, MaskMarksEachSamplesRectangle) {
    const Tensor m = splice_mask({Rect{0, 0, 1, 1}, Rect{1, 1, 2, 2}}, 3);
    EXPECT_EQ(m.shape(), (Shape{2, 3, 3, 3}));
    double s0 = 0, s1 = 0;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) {
                s0 += m.at(0, c, y, x);
                s1 += m.at(1, c, y, x);
            }
    EXPECT_EQ(s0, 3.0);
    EXPECT_EQ(s1, 12.0);
    EXPECT_EQ(m.at(1, 2, 2, 2), 1.0);
}

TEST(SpliceProperty, RandomRectanglesCoverAtLeastAQuarter) {
    Rng rng(7);
    for (int size : {16, 32, 64})
        for (int t = 0; t < 500; ++t) {
            const Rect r = random_splice_rect(size, rng);
            EXPECT_GE(r.h * r.w, size * size / 4);
            EXPECT_GE(r.y0, 0);
            EXPECT_GE(r.x0, 0);
            EXPECT_LE(r.y0 + r.h, size);
            EXPECT_LE(r.x0 + r.w, size);
        }
}
