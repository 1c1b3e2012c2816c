#pragma once

// Condition encoder E(k, m) and the key-conditioned image networks. The same
// conditioned image network serves as the mask generator G (bounded mask
// output) and as the recovery network R (residual output around its input).

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arfp/keymat.hpp"
#include "arfp/nn.hpp"

namespace arfp {

struct ArchConfig {
    int image_size = 64;
    int key_bits = kDefaultKeyBits;
    int nonce_bits = kDefaultNonceBits;
    int embed_dim = 128;         // d_e; first half key features, second half nonce features
    int width = 16;              // base channel width of the conditioned image networks
    int global_dim = 64;         // bottleneck of the global (fully connected) path
    double key_scale = 1.0;      // stddev of the key-branch weights
    double head_init_std = 0.01; // modulation heads start near gamma=1, beta=0
    double carrier_share = 0.3;  // share of the mask budget driven directly by the nonce
    double carrier_init_std = 0.3;
    int decoder_channels = 8;
    int adversary_width = 16;
    int embedder_dim = 128;

    void validate() const;
    nlohmann::json to_json() const;
    static ArchConfig from_json(const nlohmann::json& j);
};

struct ConditionEmbedding {
    std::vector<double> e;
};

// E: key bits -> sin(W_k s_k + b_k), nonce bits -> tanh(W_m s_m + b_m), then a
// linear output layer (identity at initialization) over the concatenation.
class ConditionEncoder {
public:
    ConditionEncoder(const ArchConfig& arch, Rng& rng);
    ConditionEncoder(const ConditionEncoder&) = delete;
    ConditionEncoder& operator=(const ConditionEncoder&) = delete;
    ConditionEncoder(ConditionEncoder&&) = default;

    // key_signal [N, key_bits], nonce_signal [N, nonce_bits], entries +-1.
    // With key_features=false the key half is replaced by zeros, so the output
    // no longer depends on the key.
    Var operator()(const Var& key_signal, const Var& nonce_signal, bool key_features = true) const;

    ParamSet params;
    Linear key_branch, nonce_branch, out;

private:
    int half_;
};

// Image network conditioned on e through channel-wise modulation of every
// residual block and decoder stage.
class CondImageNet {
public:
    enum class Mode { Mask, Residual };
    CondImageNet(const ArchConfig& arch, Mode mode, Rng& rng, const std::string& prefix);
    CondImageNet(const CondImageNet&) = delete;
    CondImageNet& operator=(const CondImageNet&) = delete;
    CondImageNet(CondImageNet&&) = default;

    // Mask mode: bounded mask in [-1, 1]. Residual mode: clamp(x + o, -1, 1).
    Var operator()(const Var& x, const Var& e) const;
    // Zeroes the final output layer(s): mask mode then emits 0, residual mode the input.
    void zero_output_head();
    Mode mode() const { return mode_; }

    ParamSet params;
    Conv2d c0, d1, d2;
    Conv2d res_a[2], res_b[2];
    ModulationHead res_mod[2];
    Linear g1, g2;
    Conv2d u1, u2, o;
    ModulationHead m1, m2;
    Linear carrier;  // mask mode only

private:
    ArchConfig arch_;
    Mode mode_;
};

ConditionEmbedding encode_condition(const SecretKey& key, const Nonce& nonce, const ConditionEncoder& enc,
                                    const ArchConfig& arch);

// out[c,h,w] = gamma[c] * f[c,h,w] + beta[c]. f is [C,H,W] or [N,C,H,W]; gamma
// and beta have C entries (or N*C for batched input).
Tensor kmb_modulate(const Tensor& f, const std::vector<double>& gamma, const std::vector<double>& beta);
// Modulation with (gamma, beta) produced by a head from embedding e.
Tensor kmb_modulate(const Tensor& f, const ConditionEmbedding& e, const ModulationHead& head);

struct Protector {
    ArchConfig arch;
    ConditionEncoder enc;
    CondImageNet gen;
    Protector(const ArchConfig& a, std::uint64_t seed);
};

struct ProtectedImage {
    Tensor z;  // [3,H,W] in [-1,1]
    double alpha = 0.0;
    std::string key_fingerprint;
    std::string nonce_id;
};

// x is a single image [3,H,W] with values in [-1,1].
Tensor generate_mask(const Tensor& x, const SecretKey& key, const Nonce& nonce, const Protector& p);
ProtectedImage protect(const Tensor& x, const SecretKey& key, const Nonce& nonce, double alpha, const Protector& p);

// Batched signal helpers.
Tensor signal_batch(const std::vector<Bits>& bits);
// Validates a single image: rank 3, 3 channels, square side == size (0 = any), range [-1,1].
void check_image(const Tensor& x, int size, const char* what);
Tensor as_batch(const Tensor& image);
Tensor first_image(const Tensor& batch);

}  // namespace arfp
