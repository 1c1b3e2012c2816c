#include "arfp/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace arfp {

NonceDecoder::NonceDecoder(const ArchConfig& arch, Rng& rng)
    : size_(arch.image_size), channels_(arch.decoder_channels) {
    arch.validate();
    c1 = Conv2d(params, "dec.c1", 3, channels_, 3, 1, 1, rng);
    fc = Linear(params, "dec.fc", channels_ * size_ * size_, arch.nonce_bits, rng);
}

Var NonceDecoder::operator()(const Var& z) const {
    if (z.value().rank() != 4 || z.dim(1) != 3 || z.dim(2) != size_ || z.dim(3) != size_)
        throw std::invalid_argument("nonce decoder expects [N,3," + std::to_string(size_) + "," +
                                    std::to_string(size_) + "], got " + shape_str(z.shape()));
    Var h = leaky_relu(c1(z), 0.2);
    return fc(reshape(h, {z.dim(0), channels_ * size_ * size_}));
}

void NonceDecoder::zero_output_head() {
    fc.w.mutable_value().fill(0.0);
    fc.b.mutable_value().fill(0.0);
}

Recoverer::Recoverer(const ArchConfig& a, std::uint64_t seed)
    : arch(a),
      rec([&] {
          Rng r(seed, 3);
          return CondImageNet(a, CondImageNet::Mode::Residual, r, "rec");
      }()),
      dec([&] {
          Rng r(seed, 4);
          return NonceDecoder(a, r);
      }()) {}

Tensor recover(const Tensor& z, const SecretKey& key, const Nonce& nonce, const ConditionEncoder& enc,
               const Recoverer& r) {
    check_image(z, r.arch.image_size, "recover");
    const ConditionEmbedding e = encode_condition(key, nonce, enc, r.arch);
    NoGradGuard ng;
    Var out = r.rec(Var(as_batch(z)), Var(Tensor({1, r.arch.embed_dim}, e.e)));
    return first_image(out.value());
}

Tensor recover(const Tensor& z, const SecretKey& key, const ConditionEncoder& enc, const Recoverer& r) {
    return recover(z, key, decode_nonce(z, r).bits, enc, r);
}

DecodedNonce decode_nonce(const Tensor& z, const Recoverer& r) {
    check_image(z, r.arch.image_size, "decode_nonce");
    NoGradGuard ng;
    Var out = r.dec(Var(as_batch(z)));
    DecodedNonce d;
    d.signal = out.value().vec();
    d.bits.bits = threshold_bits(d.signal);
    return d;
}

double nonce_loss(const std::vector<double>& decoded, const Nonce& m) {
    if (decoded.size() != m.bits.size())
        throw std::invalid_argument("nonce_loss: decoded length " + std::to_string(decoded.size()) +
                                    " != nonce length " + std::to_string(m.bits.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < decoded.size(); ++i) {
        const double d = decoded[i] - (m.bits[i] ? 1.0 : -1.0);
        s += d * d;
    }
    return s;
}

nlohmann::json IntegrityVerdict::to_json() const {
    return {{"image_id", image_id}, {"ber", ber}, {"threshold", threshold}, {"accepted", accepted}};
}

IntegrityVerdict integrity_from_ber(double ber, double threshold, const std::string& image_id) {
    if (!(threshold > 0.0 && threshold < 0.5))
        throw std::invalid_argument("integrity threshold must lie in (0, 0.5)");
    return IntegrityVerdict{image_id, ber, threshold, ber <= threshold};
}

IntegrityVerdict verify_integrity(const Tensor& z, const Nonce& expected, const Recoverer& r, double threshold,
                                  const std::string& image_id) {
    if (!(threshold > 0.0 && threshold < 0.5))
        throw std::invalid_argument("integrity threshold must lie in (0, 0.5)");
    return integrity_from_ber(ber(expected.bits, decode_nonce(z, r).bits.bits), threshold, image_id);
}

Rect random_splice_rect(int size, Rng& rng) {
    if (size < 2) throw std::invalid_argument("random_splice_rect: image too small");
    const double area = rng.uniform(0.25, 0.5);
    Rect r;
    r.h = static_cast<int>(std::lround(size * std::sqrt(area) * rng.uniform(0.8, 1.25)));
    r.h = std::clamp(r.h, std::max(1, size / 4), size);
    r.w = std::min(size, static_cast<int>(std::ceil(area * size * size / r.h)));
    r.y0 = rng.uniform_int(0, size - r.h);
    r.x0 = rng.uniform_int(0, size - r.w);
    return r;
}

Tensor splice(const Tensor& z, const Tensor& donor, const Rect& r) {
    if (!z.same_shape(donor)) throw std::invalid_argument("splice: shape mismatch");
    if (z.rank() != 3 && z.rank() != 4) throw std::invalid_argument("splice: expected [3,S,S] or [N,3,S,S]");
    const int H = z.dim(z.rank() - 2), W = z.dim(z.rank() - 1);
    if (r.y0 < 0 || r.x0 < 0 || r.y0 + r.h > H || r.x0 + r.w > W) throw std::invalid_argument("splice: rectangle outside image");
    Tensor out = z;
    const std::size_t planes = z.size() / static_cast<std::size_t>(H * W);
    for (std::size_t p = 0; p < planes; ++p)
        for (int y = r.y0; y < r.y0 + r.h; ++y)
            for (int x = r.x0; x < r.x0 + r.w; ++x) {
                const std::size_t i = p * H * W + static_cast<std::size_t>(y * W + x);
                out[i] = donor[i];
            }
    return out;
}

Tensor splice_mask(const std::vector<Rect>& rects, int size) {
    Tensor m({static_cast<int>(rects.size()), 3, size, size});
    for (std::size_t n = 0; n < rects.size(); ++n) {
        const Rect& r = rects[n];
        for (int c = 0; c < 3; ++c)
            for (int y = r.y0; y < r.y0 + r.h; ++y)
                for (int x = r.x0; x < r.x0 + r.w; ++x) m.at(static_cast<int>(n), c, y, x) = 1.0;
    }
    return m;
}

}  // namespace arfp
