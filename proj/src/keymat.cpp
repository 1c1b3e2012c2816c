#include "arfp/keymat.hpp"

#include <stdexcept>

#include "arfp/rng.hpp"
#include "arfp/tensor.hpp"

namespace arfp {

namespace {

constexpr std::uint64_t kKeyStream = 0x6b6579;       // "key"
constexpr std::uint64_t kNonceStream = 0x6e6f6e6365;  // "nonce"
constexpr std::uint64_t kFlipStream = 0x666c6970;     // "flip"

Bits random_bits(std::uint64_t seed, std::uint64_t stream, int n_bits, const char* what) {
    if (n_bits <= 0) throw std::invalid_argument(std::string(what) + ": n_bits must be >= 1");
    Rng rng(seed, stream);
    Bits b(static_cast<std::size_t>(n_bits));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return b;
}

void require_equal_length(const Bits& a, const Bits& b, const char* what) {
    if (a.size() != b.size())
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
}

}  // namespace

SecretKey generate_key(std::uint64_t seed, int n_bits) {
    return SecretKey{random_bits(seed, kKeyStream, n_bits, "generate_key")};
}

Nonce generate_nonce(std::uint64_t seed, int n_bits) {
    return Nonce{random_bits(seed, kNonceStream, n_bits, "generate_nonce")};
}

SecretKey identity_key(std::uint64_t master_seed, int identity, int n_bits) {
    if (identity < 0) throw std::invalid_argument("identity_key: negative identity");
    return generate_key(splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(identity) + 1)), n_bits);
}

int hamming(const Bits& a, const Bits& b) {
    require_equal_length(a, b, "hamming");
    int d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]) ? 1 : 0;
    return d;
}

SecretKey perturb_key(const SecretKey& key, int flip_count, std::uint64_t seed) {
    if (flip_count < 0 || flip_count > key.size())
        throw std::invalid_argument("perturb_key: flip_count " + std::to_string(flip_count) + " outside [0, " +
                                    std::to_string(key.size()) + "]");
    Rng rng(seed, kFlipStream);
    const std::vector<int> order = rng.permutation(key.size());
    SecretKey out = key;
    for (int i = 0; i < flip_count; ++i) {
        auto& bit = out.bits[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        bit = static_cast<std::uint8_t>(1 - bit);
    }
    return out;
}

double ber(const Bits& truth, const Bits& decoded) {
    require_equal_length(truth, decoded, "ber");
    if (truth.empty()) throw std::invalid_argument("ber: empty bit vectors");
    return static_cast<double>(hamming(truth, decoded)) / static_cast<double>(truth.size());
}

BitSignal bits_to_signal(const Bits& bits) {
    BitSignal s(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) s[i] = bits[i] ? 1.0 : -1.0;
    return s;
}

Bits threshold_bits(const std::vector<double>& values) {
    Bits b(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) b[i] = values[i] > 0.0 ? 1 : 0;
    return b;
}

std::string to_hex(const Bits& bits) {
    static const char* digits = "0123456789abcdef";
    const std::size_t n = bits.size();
    const std::size_t ndig = (n + 3) / 4;
    const std::size_t pad = ndig * 4 - n;
    std::string out;
    out.reserve(ndig);
    for (std::size_t d = 0; d < ndig; ++d) {
        int v = 0;
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t pos = d * 4 + j;  // position in the padded vector
            v = (v << 1) | ((pos >= pad && bits[pos - pad]) ? 1 : 0);
        }
        out.push_back(digits[v]);
    }
    return out;
}

Bits from_hex(const std::string& hex, int n_bits) {
    if (n_bits <= 0) throw std::invalid_argument("from_hex: n_bits must be >= 1");
    const std::size_t ndig = (static_cast<std::size_t>(n_bits) + 3) / 4;
    if (hex.size() != ndig)
        throw std::invalid_argument("from_hex: expected " + std::to_string(ndig) + " hex digits, got " +
                                    std::to_string(hex.size()));
    const std::size_t pad = ndig * 4 - static_cast<std::size_t>(n_bits);
    Bits bits(static_cast<std::size_t>(n_bits));
    for (std::size_t d = 0; d < ndig; ++d) {
        const char c = hex[d];
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else throw std::invalid_argument(std::string("from_hex: invalid digit '") + c + "'");
        for (std::size_t j = 0; j < 4; ++j) {
            const std::size_t pos = d * 4 + j;
            const int bit = (v >> (3 - j)) & 1;
            if (pos < pad) {
                if (bit) throw std::invalid_argument("from_hex: value exceeds n_bits");
            } else {
                bits[pos - pad] = static_cast<std::uint8_t>(bit);
            }
        }
    }
    return bits;
}

std::string fingerprint(const Bits& bits) {
    const std::uint64_t n = bits.size();
    std::uint64_t h = fnv1a(&n, sizeof n);
    return hex64(fnv1a(bits.data(), bits.size(), h));
}

}  // namespace arfp
