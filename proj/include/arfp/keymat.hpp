#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace arfp {

using Bits = std::vector<std::uint8_t>;
using BitSignal = std::vector<double>;

inline constexpr int kDefaultKeyBits = 256;
inline constexpr int kDefaultNonceBits = 64;

struct SecretKey {
    Bits bits;
    int size() const { return static_cast<int>(bits.size()); }
    bool operator==(const SecretKey&) const = default;
};

struct Nonce {
    Bits bits;
    int size() const { return static_cast<int>(bits.size()); }
    bool operator==(const Nonce&) const = default;
};

// Uniform i.i.d. bits, a pure function of (seed, n_bits). Keys and nonces draw
// from different streams so equal seeds do not produce related bits.
SecretKey generate_key(std::uint64_t seed, int n_bits = kDefaultKeyBits);
Nonce generate_nonce(std::uint64_t seed, int n_bits = kDefaultNonceBits);

// Per-user key: one fixed key per identity label, derived from a master seed.
SecretKey identity_key(std::uint64_t master_seed, int identity, int n_bits = kDefaultKeyBits);

int hamming(const Bits& a, const Bits& b);
inline int hamming(const SecretKey& a, const SecretKey& b) { return hamming(a.bits, b.bits); }

// Flips exactly flip_count distinct positions chosen by seed. Applying it
// twice with the same seed restores the key.
SecretKey perturb_key(const SecretKey& key, int flip_count, std::uint64_t seed);

double ber(const Bits& truth, const Bits& decoded);

BitSignal bits_to_signal(const Bits& bits);
// Inverse of bits_to_signal: 1 where value > 0, else 0.
Bits threshold_bits(const std::vector<double>& values);

// Lowercase hex, big-endian: bits[0] is the most significant bit. Lengths that
// are not a multiple of 4 are zero-padded on the left.
std::string to_hex(const Bits& bits);
Bits from_hex(const std::string& hex, int n_bits);

// Short stable identifier (16 hex chars) for metadata; not a secret-preserving hash.
std::string fingerprint(const Bits& bits);

}  // namespace arfp
