#include <gtest/gtest.h>

#include <set>
#include <stdexcept>

#include "arfp/keymat.hpp"

using namespace arfp;

TEST(Keymat, GenerationIsAPureFunctionOfSeed) {
    EXPECT_EQ(generate_key(5), generate_key(5));
    EXPECT_NE(generate_key(5), generate_key(6));
    EXPECT_EQ(generate_key(5).size(), 256);
    EXPECT_EQ(generate_nonce(5).size(), 64);
    EXPECT_EQ(generate_key(3, 40).size(), 40);
}

TEST(Keymat, KeyAndNonceStreamsDiffer) {
    const SecretKey k = generate_key(9, 64);
    const Nonce m = generate_nonce(9, 64);
    EXPECT_NE(k.bits, m.bits);
}

TEST(Keymat, InvalidLengthsThrow) {
    EXPECT_THROW(generate_key(1, 0), std::invalid_argument);
    EXPECT_THROW(generate_nonce(1, -3), std::invalid_argument);
    EXPECT_THROW(identity_key(1, -1), std::invalid_argument);
}

TEST(Keymat, IdentityKeysAreDistinctAndStable) {
    std::set<Bits> seen;
    for (int i = 0; i < 20; ++i) {
        EXPECT_EQ(identity_key(1, i), identity_key(1, i));
        seen.insert(identity_key(1, i).bits);
    }
    EXPECT_EQ(seen.size(), 20u);
    EXPECT_NE(identity_key(1, 0), identity_key(2, 0));
}

TEST(Keymat, HammingHandExamples) {
    EXPECT_EQ(hamming(Bits{0, 1, 1, 0}, Bits{0, 1, 1, 0}), 0);
    EXPECT_EQ(hamming(Bits{0, 1, 1, 0}, Bits{1, 0, 0, 1}), 4);
    EXPECT_EQ(hamming(Bits{1, 1, 0}, Bits{1, 0, 0}), 1);
    EXPECT_THROW(hamming(Bits{1}, Bits{1, 0}), std::invalid_argument);
}

TEST(Keymat, PerturbFlipsExactlyRequestedBits) {
    const SecretKey k = generate_key(11);
    for (int flips : {0, 1, 16, 128, 256}) {
        const SecretKey p = perturb_key(k, flips, 77);
        EXPECT_EQ(hamming(k, p), flips);
        EXPECT_EQ(perturb_key(p, flips, 77), k);
    }
    EXPECT_THROW(perturb_key(k, 257, 1), std::invalid_argument);
    EXPECT_THROW(perturb_key(k, -1, 1), std::invalid_argument);
}

TEST(Keymat, BerAndSignalMapping) {
    EXPECT_DOUBLE_EQ(ber(Bits{0, 0, 1, 1}, Bits{0, 1, 1, 0}), 0.5);
    EXPECT_DOUBLE_EQ(ber(Bits{1, 0}, Bits{1, 0}), 0.0);
    EXPECT_THROW(ber(Bits{}, Bits{}), std::invalid_argument);
    const BitSignal s = bits_to_signal(Bits{1, 0, 1});
    EXPECT_EQ(s, (BitSignal{1.0, -1.0, 1.0}));
    EXPECT_EQ(threshold_bits({0.3, -0.2, 0.0, 5.0}), (Bits{1, 0, 0, 1}));
}

TEST(Keymat, HexIsBigEndian) {
    EXPECT_EQ(to_hex(Bits{1, 0, 1, 0, 0, 0, 0, 1}), "a1");
    EXPECT_EQ(to_hex(Bits{1, 1, 1}), "7");
    EXPECT_EQ(from_hex("a1", 8), (Bits{1, 0, 1, 0, 0, 0, 0, 1}));
    const Bits k = generate_key(4).bits;
    EXPECT_EQ(from_hex(to_hex(k), 256), k);
    EXPECT_THROW(from_hex("zz", 8), std::invalid_argument);
}

TEST(Keymat, FingerprintIsShortAndStable) {
    const Bits k = generate_key(4).bits;
    EXPECT_EQ(fingerprint(k).size(), 16u);
    EXPECT_EQ(fingerprint(k), fingerprint(k));
    EXPECT_NE(fingerprint(k), fingerprint(perturb_key(generate_key(4), 1, 0).bits));
}

TEST(KeymatProperty, RandomPairsDisagreeOnHalfTheBits) {
    long total = 0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) total += hamming(generate_key(2 * i), generate_key(2 * i + 1));
    EXPECT_NEAR(static_cast<double>(total) / n, 128.0, 1.5);
}
