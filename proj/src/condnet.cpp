#include "arfp/condnet.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace arfp {

void ArchConfig::validate() const {
    if (image_size < 16 || image_size % 8 != 0)
        throw std::invalid_argument("image_size must be a multiple of 8 and at least 16");
    if (key_bits < 1 || nonce_bits < 1) throw std::invalid_argument("key_bits and nonce_bits must be >= 1");
    if (embed_dim < 2 || embed_dim % 2 != 0) throw std::invalid_argument("embed_dim must be even and >= 2");
    if (width < 1 || global_dim < 1 || decoder_channels < 1 || adversary_width < 1 || embedder_dim < 1)
        throw std::invalid_argument("network widths must be positive");
    if (carrier_share < 0.0 || carrier_share >= 1.0) throw std::invalid_argument("carrier_share must lie in [0, 1)");
}

nlohmann::json ArchConfig::to_json() const {
    return {{"image_size", image_size},         {"key_bits", key_bits},
            {"nonce_bits", nonce_bits},         {"embed_dim", embed_dim},
            {"width", width},                   {"global_dim", global_dim},
            {"key_scale", key_scale},           {"head_init_std", head_init_std},
            {"carrier_share", carrier_share},   {"carrier_init_std", carrier_init_std},
            {"decoder_channels", decoder_channels}, {"adversary_width", adversary_width},
            {"embedder_dim", embedder_dim}};
}

ArchConfig ArchConfig::from_json(const nlohmann::json& j) {
    ArchConfig a;
    a.image_size = j.value("image_size", a.image_size);
    a.key_bits = j.value("key_bits", a.key_bits);
    a.nonce_bits = j.value("nonce_bits", a.nonce_bits);
    a.embed_dim = j.value("embed_dim", a.embed_dim);
    a.width = j.value("width", a.width);
    a.global_dim = j.value("global_dim", a.global_dim);
    a.key_scale = j.value("key_scale", a.key_scale);
    a.head_init_std = j.value("head_init_std", a.head_init_std);
    a.carrier_share = j.value("carrier_share", a.carrier_share);
    a.carrier_init_std = j.value("carrier_init_std", a.carrier_init_std);
    a.decoder_channels = j.value("decoder_channels", a.decoder_channels);
    a.adversary_width = j.value("adversary_width", a.adversary_width);
    a.embedder_dim = j.value("embedder_dim", a.embedder_dim);
    a.validate();
    return a;
}

// ------------------------------------------------------------------ encoder

ConditionEncoder::ConditionEncoder(const ArchConfig& arch, Rng& rng) : half_(arch.embed_dim / 2) {
    arch.validate();
    key_branch = Linear(params, "enc.key", arch.key_bits, half_, rng);
    nonce_branch = Linear(params, "enc.nonce", arch.nonce_bits, half_, rng);
    out = Linear(params, "enc.out", arch.embed_dim, arch.embed_dim, rng);
    // Random-feature key branch: large weights make single-bit changes move
    // the features far apart.
    Tensor& kw = key_branch.w.mutable_value();
    for (std::size_t i = 0; i < kw.size(); ++i) kw[i] = rng.normal(0.0, arch.key_scale);
    Tensor& kb = key_branch.b.mutable_value();
    for (std::size_t i = 0; i < kb.size(); ++i) kb[i] = rng.uniform(-std::numbers::pi, std::numbers::pi);
    Tensor& ow = out.w.mutable_value();
    ow.fill(0.0);
    for (int i = 0; i < arch.embed_dim; ++i) ow[static_cast<std::size_t>(i * arch.embed_dim + i)] = 1.0;
    out.b.mutable_value().fill(0.0);
}

Var ConditionEncoder::operator()(const Var& key_signal, const Var& nonce_signal, bool key_features) const {
    Var kf = sin(key_branch(key_signal));
    if (!key_features) kf = Var(Tensor(kf.shape(), 0.0));
    Var mf = tanh(nonce_branch(nonce_signal));
    return out(concat(kf, mf));
}

// ---------------------------------------------------------- image network

CondImageNet::CondImageNet(const ArchConfig& arch, Mode mode, Rng& rng, const std::string& p)
    : arch_(arch), mode_(mode) {
    arch.validate();
    const int W = arch.width, S = arch.image_size, q = S / 4, de = arch.embed_dim;
    c0 = Conv2d(params, p + ".c0", 3, W, 3, 1, 1, rng);
    d1 = Conv2d(params, p + ".d1", W, 2 * W, 3, 2, 1, rng);
    d2 = Conv2d(params, p + ".d2", 2 * W, 2 * W, 3, 2, 1, rng);
    for (int i = 0; i < 2; ++i) {
        const std::string n = p + ".res" + std::to_string(i);
        res_a[i] = Conv2d(params, n + ".a", 2 * W, 2 * W, 3, 1, 1, rng);
        res_mod[i] = ModulationHead(params, n + ".mod", de, 2 * W, rng, arch.head_init_std);
        res_b[i] = Conv2d(params, n + ".b", 2 * W, 2 * W, 3, 1, 1, rng);
    }
    g1 = Linear(params, p + ".g1", 2 * W * q * q, arch.global_dim, rng);
    g2 = Linear(params, p + ".g2", arch.global_dim + de, W * q * q, rng);
    u1 = Conv2d(params, p + ".u1", 3 * W, 2 * W, 3, 1, 1, rng);
    m1 = ModulationHead(params, p + ".m1", de, 2 * W, rng, arch.head_init_std);
    u2 = Conv2d(params, p + ".u2", 3 * W, W, 3, 1, 1, rng);
    m2 = ModulationHead(params, p + ".m2", de, W, rng, arch.head_init_std);
    o = Conv2d(params, p + ".o", W, 3, 3, 1, 1, rng);
    if (mode_ == Mode::Residual) {
        o.zero_init();
    } else if (arch.carrier_share > 0.0) {
        carrier = Linear(params, p + ".carrier", de / 2, 3 * S * S, rng);
        carrier.normal_init(rng, arch.carrier_init_std);
    }
}

void CondImageNet::zero_output_head() {
    o.zero_init();
    if (carrier.w.defined()) {
        carrier.w.mutable_value().fill(0.0);
        carrier.b.mutable_value().fill(0.0);
    }
}

Var CondImageNet::operator()(const Var& x, const Var& e) const {
    const int N = x.dim(0), W = arch_.width, S = arch_.image_size, q = S / 4, de = arch_.embed_dim;
    if (x.value().rank() != 4 || x.dim(1) != 3 || x.dim(2) != S || x.dim(3) != S)
        throw std::invalid_argument("image network expects [N,3," + std::to_string(S) + "," + std::to_string(S) +
                                    "], got " + shape_str(x.shape()));
    if (e.value().rank() != 2 || e.dim(0) != N || e.dim(1) != de)
        throw std::invalid_argument("condition embedding must be [N," + std::to_string(de) + "]");
    constexpr double slope = 0.2;
    Var a = leaky_relu(c0(x), slope);
    Var b = leaky_relu(d1(a), slope);
    Var h = leaky_relu(d2(b), slope);
    for (int i = 0; i < 2; ++i) h = add(h, res_b[i](leaky_relu(res_mod[i](res_a[i](h), e), slope)));
    Var g = leaky_relu(g1(reshape(h, {N, 2 * W * q * q})), slope);
    g = reshape(g2(concat(g, e)), {N, W, q, q});
    h = upsample_nearest2x(concat(h, g));
    h = leaky_relu(m1(u1(h), e), slope);
    h = concat(upsample_nearest2x(h), a);
    h = leaky_relu(m2(u2(h), e), slope);
    Var out = o(h);
    if (mode_ == Mode::Residual) return clamp(add(x, out), -1.0, 1.0);
    const double rho = arch_.carrier_share;
    Var mask = tanh(out);
    if (rho <= 0.0 || !carrier.w.defined()) return mask;
    Var c = tanh(reshape(carrier(slice_cols(e, de / 2, de / 2)), {N, 3, S, S}));
    return add(scale(mask, 1.0 - rho), scale(c, rho));
}

// ------------------------------------------------------------- operations

Tensor signal_batch(const std::vector<Bits>& bits) {
    if (bits.empty()) throw std::invalid_argument("signal_batch: empty batch");
    const int n = static_cast<int>(bits.size()), d = static_cast<int>(bits[0].size());
    Tensor t({n, d});
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(bits[static_cast<std::size_t>(i)].size()) != d)
            throw std::invalid_argument("signal_batch: inconsistent bit lengths");
        for (int j = 0; j < d; ++j)
            t[static_cast<std::size_t>(i * d + j)] = bits[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ? 1.0 : -1.0;
    }
    return t;
}

void check_image(const Tensor& x, int size, const char* what) {
    if (x.rank() != 3 || x.dim(0) != 3)
        throw std::invalid_argument(std::string(what) + ": expected a [3,H,W] image, got " + shape_str(x.shape()));
    if (size > 0 && (x.dim(1) != size || x.dim(2) != size))
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(size) + "x" +
                                    std::to_string(size) + " image, got " + shape_str(x.shape()));
    for (double v : x.vec())
        if (!(v >= -1.0 && v <= 1.0)) throw std::invalid_argument(std::string(what) + ": pixel values outside [-1,1]");
}

Tensor as_batch(const Tensor& image) {
    Shape s{1};
    s.insert(s.end(), image.shape().begin(), image.shape().end());
    return image.reshaped(s);
}

Tensor first_image(const Tensor& batch) {
    Shape s(batch.shape().begin() + 1, batch.shape().end());
    return batch.sample(0).reshaped(s);
}

ConditionEmbedding encode_condition(const SecretKey& key, const Nonce& nonce, const ConditionEncoder& enc,
                                    const ArchConfig& arch) {
    if (key.size() != arch.key_bits)
        throw std::invalid_argument("encode_condition: key has " + std::to_string(key.size()) + " bits, encoder expects " +
                                    std::to_string(arch.key_bits));
    if (nonce.size() != arch.nonce_bits)
        throw std::invalid_argument("encode_condition: nonce has " + std::to_string(nonce.size()) +
                                    " bits, encoder expects " + std::to_string(arch.nonce_bits));
    NoGradGuard ng;
    Var e = enc(Var(signal_batch({key.bits})), Var(signal_batch({nonce.bits})));
    return ConditionEmbedding{e.value().vec()};
}

Tensor kmb_modulate(const Tensor& f, const std::vector<double>& gamma, const std::vector<double>& beta) {
    const bool single = f.rank() == 3;
    if (!single && f.rank() != 4) throw std::invalid_argument("kmb_modulate: feature map must be [C,H,W] or [N,C,H,W]");
    const Tensor fb = single ? as_batch(f) : f;
    const int N = fb.dim(0), C = fb.dim(1);
    if (gamma.size() != static_cast<std::size_t>(N * C) || beta.size() != static_cast<std::size_t>(N * C))
        throw std::invalid_argument("kmb_modulate: modulation length does not match channel count " +
                                    std::to_string(C));
    NoGradGuard ng;
    Var out = film(Var(fb), Var(Tensor({N, C}, gamma)), Var(Tensor({N, C}, beta)));
    return single ? first_image(out.value()) : out.value();
}

Tensor kmb_modulate(const Tensor& f, const ConditionEmbedding& e, const ModulationHead& head) {
    NoGradGuard ng;
    const int de = static_cast<int>(e.e.size());
    auto [gamma, beta] = head.gamma_beta(Var(Tensor({1, de}, e.e)));
    return kmb_modulate(f, gamma.value().vec(), beta.value().vec());
}

Protector::Protector(const ArchConfig& a, std::uint64_t seed)
    : arch(a),
      enc([&] {
          Rng r(seed, 1);
          return ConditionEncoder(a, r);
      }()),
      gen([&] {
          Rng r(seed, 2);
          return CondImageNet(a, CondImageNet::Mode::Mask, r, "gen");
      }()) {}

Tensor generate_mask(const Tensor& x, const SecretKey& key, const Nonce& nonce, const Protector& p) {
    check_image(x, p.arch.image_size, "generate_mask");
    const ConditionEmbedding e = encode_condition(key, nonce, p.enc, p.arch);
    NoGradGuard ng;
    Var d = p.gen(Var(as_batch(x)), Var(Tensor({1, p.arch.embed_dim}, e.e)));
    return first_image(d.value());
}

ProtectedImage protect(const Tensor& x, const SecretKey& key, const Nonce& nonce, double alpha, const Protector& p) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("protect: alpha must be >= 0");
    check_image(x, p.arch.image_size, "protect");
    ProtectedImage out;
    out.alpha = alpha;
    out.key_fingerprint = fingerprint(key.bits);
    out.nonce_id = to_hex(nonce.bits);
    if (alpha == 0.0) {
        out.z = x;
        return out;
    }
    const Tensor d = generate_mask(x, key, nonce, p);
    out.z = Tensor(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.z[i] = std::min(1.0, std::max(-1.0, x[i] + alpha * d[i]));
    return out;
}

}  // namespace arfp
