#pragma once

// Keyed recovery network R, nonce decoder D and the nonce-consistency
// integrity verdict.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "arfp/condnet.hpp"

namespace arfp {

// conv 3x3 -> leaky ReLU -> fully connected regressor to nonce_bits real outputs.
class NonceDecoder {
public:
    NonceDecoder(const ArchConfig& arch, Rng& rng);
    NonceDecoder(const NonceDecoder&) = delete;
    NonceDecoder& operator=(const NonceDecoder&) = delete;
    NonceDecoder(NonceDecoder&&) = default;

    Var operator()(const Var& z) const;  // [N,3,S,S] -> [N,nonce_bits]
    void zero_output_head();

    ParamSet params;
    Conv2d c1;
    Linear fc;

private:
    int size_;
    int channels_;
};

// R and D. R starts as the identity (zeroed residual head).
struct Recoverer {
    ArchConfig arch;
    CondImageNet rec;
    NonceDecoder dec;
    Recoverer(const ArchConfig& a, std::uint64_t seed);
};

// How the authorized party obtains the nonce at recovery time.
enum class NoncePolicy {
    Decode,    // m = threshold(D(z))
    Provided,  // nonce supplied by the caller (stored or transmitted)
};

struct DecodedNonce {
    std::vector<double> signal;  // raw decoder outputs, signal domain
    Nonce bits;                  // threshold at 0
};

// x = R(z, k, m). z is a single image [3,S,S] in [-1,1].
Tensor recover(const Tensor& z, const SecretKey& key, const Nonce& nonce, const ConditionEncoder& enc,
               const Recoverer& r);
// Default policy: decode m from z first, then recover with it.
Tensor recover(const Tensor& z, const SecretKey& key, const ConditionEncoder& enc, const Recoverer& r);

DecodedNonce decode_nonce(const Tensor& z, const Recoverer& r);

// Squared Euclidean distance between decoded outputs and the +-1 encoding of m.
double nonce_loss(const std::vector<double>& decoded, const Nonce& m);

inline constexpr double kDefaultIntegrityThreshold = 0.2;

struct IntegrityVerdict {
    std::string image_id;
    double ber = 0.0;
    double threshold = kDefaultIntegrityThreshold;
    bool accepted = false;
    nlohmann::json to_json() const;
};

IntegrityVerdict verify_integrity(const Tensor& z, const Nonce& expected, const Recoverer& r,
                                  double threshold = kDefaultIntegrityThreshold, const std::string& image_id = "");
// Verdict from a BER already measured elsewhere.
IntegrityVerdict integrity_from_ber(double ber, double threshold, const std::string& image_id = "");

// Rectangle for splicing tamper: area fraction drawn from [0.25, 0.5].
struct Rect {
    int y0 = 0, x0 = 0, h = 0, w = 0;
};
Rect random_splice_rect(int size, Rng& rng);
// Copy of z with the rectangle taken from donor. Both [3,S,S] or [N,3,S,S].
Tensor splice(const Tensor& z, const Tensor& donor, const Rect& r);
// Per-sample 0/1 mask [N,3,S,S] that is 1 inside each sample's rectangle.
Tensor splice_mask(const std::vector<Rect>& rects, int size);

}  // namespace arfp
