#include "arfp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "arfp/checkpoint.hpp"
#include "arfp/errors.hpp"
#include "arfp/image_io.hpp"

namespace arfp {

ToyData prepare_data(const ExperimentConfig& cfg) {
    ToyData d;
    d.all = load_dataset(cfg.dataset);
    auto [ref, probe] = split_reference_probe(d.all, cfg.dataset.split_fraction, cfg.dataset.seed);
    d.reference = std::move(ref);
    d.probe = std::move(probe);
    return d;
}

ToyEmbedder train_embedder(const ExperimentConfig& cfg, const ToyData& data) {
    return train_toy_embedder(data.reference.images, data.reference.labels, cfg.embedder);
}

void save_embedder(const std::string& path, const ToyEmbedder& phi) {
    save_checkpoint(path, "embedder",
                    {{"image_size", phi.image_size()}, {"classes", phi.classes()}, {"embed_dim", phi.embed_dim()}},
                    {{"emb", &phi.params}});
}

ToyEmbedder load_embedder(const std::string& path) {
    const Checkpoint ck = read_checkpoint(path);
    if (ck.kind != "embedder") throw IoError("checkpoint is not an embedder", path);
    Rng rng(0);
    ToyEmbedder phi(ck.arch.at("image_size").get<int>(), ck.arch.at("classes").get<int>(),
                    ck.arch.at("embed_dim").get<int>(), rng);
    restore_group(ck, "emb", phi.params);
    return phi;
}

TrainConfig variant_config(const TrainConfig& base, const AblationToggles& t) {
    TrainConfig tc = base;
    if (!t.arat) tc.weights.rev = 0.0;
    if (!t.kmb) {
        tc.key_features = false;
        tc.aux.wrong_key = 0.0;  // unsatisfiable without key features
    }
    if (!t.arr) {
        tc.weights.mse = 0.0;
        tc.aux.recovered_nonce = 0.0;
        tc.aux.splice = 0.0;
    }
    return tc;
}

std::unique_ptr<TrainState> train_model(const ExperimentConfig& cfg, const TrainConfig& tc, const ToyData& data,
                                        const ToyEmbedder& phi, const CycleCallback& on_cycle) {
    auto s = std::make_unique<TrainState>(cfg.arch, tc);
    train(*s, data.reference, tc, phi, on_cycle);
    return s;
}

std::unique_ptr<TrainState> load_model(const ExperimentConfig& cfg, const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("checkpoint not found", path);
    auto s = std::make_unique<TrainState>(cfg.arch, cfg.train);
    load_train_state(path, *s);
    return s;
}

namespace {

Bits random_bits(Rng& rng, int n) {
    Bits b(static_cast<std::size_t>(n));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return b;
}

}  // namespace

ProtectedSet protect_dataset(const TrainState& s, const Dataset& data, const TrainConfig& tc, double alpha,
                             std::uint64_t seed) {
    const ArchConfig& arch = s.model.arch;
    ProtectedSet p;
    p.x = data.images;
    p.labels = data.labels;
    Rng rng(seed, 61);
    for (int label : data.labels) {
        p.keys.push_back(tc.per_identity_keys ? identity_key(tc.key_seed, label, arch.key_bits).bits
                                              : random_bits(rng, arch.key_bits));
        p.nonces.push_back(random_bits(rng, arch.nonce_bits));
    }
    NoGradGuard ng;
    Var e = batch_condition(s.model.protector.enc, p.keys, p.nonces, tc.key_features);
    p.z = protect_batch(Var(p.x), e, alpha, s.model.protector.gen).value();
    return p;
}

Tensor recover_batch(const TrainState& s, const Tensor& z, const std::vector<Bits>& keys,
                     const std::vector<Bits>& nonces, bool key_features) {
    NoGradGuard ng;
    Var e = batch_condition(s.model.protector.enc, keys, nonces, key_features);
    return s.model.recoverer.rec(Var(z), e).value();
}

std::vector<Bits> decode_batch(const TrainState& s, const Tensor& z) {
    NoGradGuard ng;
    const Tensor d = s.model.recoverer.dec(Var(z)).value();
    const int n = d.dim(0), m = d.dim(1);
    std::vector<Bits> out;
    for (int i = 0; i < n; ++i)
        out.push_back(threshold_bits(std::vector<double>(d.data() + i * m, d.data() + (i + 1) * m)));
    return out;
}

double mean_ber(const std::vector<Bits>& truth, const std::vector<Bits>& decoded) {
    if (truth.size() != decoded.size() || truth.empty()) throw std::invalid_argument("mean_ber: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += ber(truth[i], decoded[i]);
    return s / static_cast<double>(truth.size());
}

PairedAttacker train_attacker(const ExperimentConfig& cfg, const TrainState& s, const TrainConfig& tc,
                              const ToyData& data) {
    const ProtectedSet p = protect_dataset(s, data.reference, tc, tc.alpha, cfg.eval.seed + 1);
    return build_paired_attacker(p.z, p.x, cfg.attacker);
}

Tensor restore_batch(const Restorer& a, const Tensor& z) {
    NoGradGuard ng;
    return a(Var(z)).value();
}

namespace {

std::vector<Bits> recovery_nonces(const ExperimentConfig& cfg, const TrainState& s, const ProtectedSet& p) {
    return cfg.eval.nonce_policy == NoncePolicy::Decode ? decode_batch(s, p.z) : p.nonces;
}

}  // namespace

VariantEval evaluate_variant(const ExperimentConfig& cfg, const TrainState& s, const TrainConfig& tc,
                             const ToyData& data, const ToyEmbedder& phi) {
    const Gallery gallery = build_gallery(data.reference.images, data.reference.labels, phi);
    const ProtectedSet p = protect_dataset(s, data.probe, tc, tc.alpha, cfg.eval.seed);
    VariantEval v;
    v.clean_psr = psr(p.z, p.labels, gallery, phi, cfg.eval.psr);
    v.psnr_z = mean_psnr(p.z, p.x);
    v.ssim_z = mean_ssim(p.z, p.x);
    const Tensor xh = recover_batch(s, p.z, p.keys, recovery_nonces(cfg, s, p), tc.key_features);
    v.recovery_ssim = mean_ssim(xh, p.x);
    const PairedAttacker a = train_attacker(cfg, s, tc, data);
    v.attacked_psr = psr(restore_batch(a.net, p.z), p.labels, gallery, phi, cfg.eval.psr);
    return v;
}

MetricsReport run_ablation(const ExperimentConfig& cfg, const ToyData& data, const ToyEmbedder& phi) {
    struct Variant {
        std::string name;
        AblationToggles t;
    };
    const std::vector<Variant> variants = {{"full", {true, true, true}},
                                           {"no-ARAT", {false, true, true}},
                                           {"no-KMB", {true, false, true}},
                                           {"no-ARR", {true, true, false}}};
    MetricsReport r("ablation", cfg.hash(), cfg.dataset.image_size);
    for (const Variant& v : variants) {
        try {
            const TrainConfig tc = variant_config(cfg.train, v.t);
            auto s = train_model(cfg, tc, data, phi);
            const VariantEval e = evaluate_variant(cfg, *s, tc, data, phi);
            r.add(v.name, "ARAT", v.t.arat, "flag", tc.seed);
            r.add(v.name, "KMB", v.t.kmb, "flag", tc.seed);
            r.add(v.name, "ARR", v.t.arr, "flag", tc.seed);
            r.add(v.name, "clean_psr", e.clean_psr, "percent", tc.seed);
            r.add(v.name, "attacked_psr", e.attacked_psr, "percent", tc.seed);
            r.add(v.name, "recovery_ssim", e.recovery_ssim, "ratio", tc.seed);
        } catch (const std::exception& ex) {
            throw ExperimentError(v.name, ex.what());
        }
    }
    return r;
}

std::string key_condition(int flips) { return flips < 0 ? "HD=random" : "HD=" + std::to_string(flips); }

MetricsReport run_key_sweep(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data) {
    const TrainConfig& tc = cfg.train;
    const ProtectedSet p = protect_dataset(s, data.probe, tc, tc.alpha, cfg.eval.seed);
    const std::vector<Bits> m_hat = recovery_nonces(cfg, s, p);
    MetricsReport r("key-sweep", cfg.hash(), cfg.dataset.image_size);
    const double ber_z = mean_ber(p.nonces, decode_batch(s, p.z));
    for (int flips : cfg.eval.key_error_grid) {
        std::vector<Bits> keys;
        double hd = 0.0;
        for (std::size_t i = 0; i < p.keys.size(); ++i) {
            const std::uint64_t seed = cfg.eval.seed * 1000003ULL + i;
            SecretKey k = flips < 0 ? generate_key(seed, s.model.arch.key_bits)
                                    : perturb_key(SecretKey{p.keys[i]}, flips, seed);
            hd += hamming(k.bits, p.keys[i]);
            keys.push_back(std::move(k.bits));
        }
        const Tensor xh = recover_batch(s, p.z, keys, m_hat, tc.key_features);
        const std::string c = key_condition(flips);
        r.add(c, "hamming", hd / static_cast<double>(keys.size()), "bits", cfg.eval.seed);
        r.add(c, "psnr", mean_psnr(xh, p.x), "dB", cfg.eval.seed);
        r.add(c, "ssim", mean_ssim(xh, p.x), "ratio", cfg.eval.seed);
        r.add(c, "nonce_ber", mean_ber(p.nonces, decode_batch(s, xh)), "fraction", cfg.eval.seed);
        r.add(c, "nonce_ber_protected", ber_z, "fraction", cfg.eval.seed);
    }
    return r;
}

MetricsReport run_tamper_suite(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data) {
    const TrainConfig& tc = cfg.train;
    const ProtectedSet p = protect_dataset(s, data.probe, tc, tc.alpha, cfg.eval.seed);
    const int n = p.z.dim(0), S = cfg.dataset.image_size;
    std::vector<std::pair<std::string, Tensor>> conditions;
    conditions.emplace_back("raw", p.z);
    {
        std::vector<Tensor> j;
        for (int i = 0; i < n; ++i) j.push_back(jpeg_roundtrip(first_image(p.z.sample(i)), cfg.eval.jpeg_quality));
        conditions.emplace_back("jpeg" + std::to_string(cfg.eval.jpeg_quality), Tensor::stack(j));
    }
    {
        Rng rng(cfg.eval.seed, 62);
        std::vector<Tensor> sp;
        for (int i = 0; i < n; ++i)
            sp.push_back(splice(first_image(p.z.sample(i)), first_image(p.z.sample((i + 1) % n)),
                                random_splice_rect(S, rng)));
        conditions.emplace_back("splice", Tensor::stack(sp));
    }
    {
        const PairedAttacker a = train_attacker(cfg, s, tc, data);
        conditions.emplace_back("paired-restorer", restore_batch(a.net, p.z));
    }
    if (cfg.purifier.family == AttackFamily::NoisePurifier) {
        const PairedAttacker d = train_denoiser(data.reference.images, cfg.purifier.strength, cfg.purifier);
        conditions.emplace_back("noise-purifier", purify(p.z, AttackFamily::NoisePurifier, cfg.purifier.strength, &d.net,
                                                         cfg.eval.seed));
    } else {
        conditions.emplace_back("blur-purifier", purify(p.z, AttackFamily::BlurPurifier, cfg.purifier.strength));
    }
    MetricsReport r("tamper", cfg.hash(), S);
    for (const auto& [name, img] : conditions) {
        const std::vector<Bits> dec = decode_batch(s, img);
        int accepted = 0;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double b = ber(p.nonces[static_cast<std::size_t>(i)], dec[static_cast<std::size_t>(i)]);
            total += b;
            accepted += integrity_from_ber(b, cfg.eval.integrity_threshold).accepted;
        }
        r.add(name, "nonce_ber", total / n, "fraction", cfg.eval.seed);
        r.add(name, "accepted_fraction", static_cast<double>(accepted) / n, "fraction", cfg.eval.seed);
    }
    return r;
}

std::string alpha_condition(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "alpha=%.4g", alpha);
    return buf;
}

MetricsReport run_alpha_sweep(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data,
                              const ToyEmbedder& phi) {
    if (cfg.eval.alpha_grid.empty()) throw std::invalid_argument("alpha sweep: empty grid");
    const Gallery gallery = build_gallery(data.reference.images, data.reference.labels, phi);
    MetricsReport r("alpha-sweep", cfg.hash(), cfg.dataset.image_size);
    const std::string mode = cfg.eval.alpha_sweep_retrain ? "retrain" : "rescale";
    for (double alpha : cfg.eval.alpha_grid) {
        std::unique_ptr<TrainState> own;
        const TrainState* model = &s;
        TrainConfig tc = cfg.train;
        if (cfg.eval.alpha_sweep_retrain) {
            tc.alpha = alpha;
            own = train_model(cfg, tc, data, phi);
            model = own.get();
        }
        const ProtectedSet p = protect_dataset(*model, data.probe, tc, alpha, cfg.eval.seed);
        const std::string c = alpha_condition(alpha);
        r.add(c, "alpha", alpha, mode, cfg.eval.seed);
        r.add(c, "psr", psr(p.z, p.labels, gallery, phi, cfg.eval.psr), "percent", cfg.eval.seed);
        r.add(c, "psnr", mean_psnr(p.z, p.x), "dB", cfg.eval.seed);
        r.add(c, "ssim", mean_ssim(p.z, p.x), "ratio", cfg.eval.seed);
    }
    return r;
}

std::string alpha_sweep_csv(const MetricsReport& r, const std::vector<double>& alphas) {
    std::string out = "alpha,psr,psnr,ssim\n";
    char buf[128];
    for (double a : alphas) {
        const std::string c = alpha_condition(a);
        std::snprintf(buf, sizeof buf, "%.4g,%.6f,%.6f,%.6f\n", a, r.value(c, "psr"), r.value(c, "psnr"), r.value(c, "ssim"));
        out += buf;
    }
    return out;
}

void write_alpha_plot(const std::string& path, const std::vector<double>& alphas, const std::vector<double>& psnr,
                      const std::vector<double>& psr) {
    if (alphas.empty() || alphas.size() != psnr.size() || alphas.size() != psr.size())
        throw std::invalid_argument("alpha plot: mismatched series");
    const int W = 640, H = 420, L = 70, R = 70, T = 40, B = 60;
    cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    const double amin = *std::min_element(alphas.begin(), alphas.end());
    const double amax = std::max(*std::max_element(alphas.begin(), alphas.end()), amin + 1e-9);
    double pmin = 1e300, pmax = -1e300;
    for (double v : psnr)
        if (std::isfinite(v)) pmin = std::min(pmin, v), pmax = std::max(pmax, v);
    if (pmin > pmax) pmin = 0, pmax = 1;
    if (pmax - pmin < 1e-9) pmax = pmin + 1;
    auto px = [&](double a) { return L + static_cast<int>((a - amin) / (amax - amin) * (W - L - R)); };
    auto py = [&](double v, double lo, double hi) { return H - B - static_cast<int>((v - lo) / (hi - lo) * (H - T - B)); };
    cv::rectangle(img, {L, T}, {W - R, H - B}, cv::Scalar(0, 0, 0), 1);
    const cv::Scalar blue(200, 80, 0), red(0, 0, 200);
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double v = std::isfinite(psnr[i]) ? psnr[i] : pmax;
        const cv::Point a(px(alphas[i]), py(v, pmin, pmax)), b(px(alphas[i]), py(psr[i], 0, 100));
        cv::circle(img, a, 4, blue, cv::FILLED);
        cv::circle(img, b, 4, red, cv::FILLED);
        if (i > 0) {
            const double pv = std::isfinite(psnr[i - 1]) ? psnr[i - 1] : pmax;
            cv::line(img, {px(alphas[i - 1]), py(pv, pmin, pmax)}, a, blue, 2);
            cv::line(img, {px(alphas[i - 1]), py(psr[i - 1], 0, 100)}, b, red, 2);
        }
        char lab[32];
        std::snprintf(lab, sizeof lab, "%.2f", alphas[i]);
        cv::putText(img, lab, {px(alphas[i]) - 14, H - B + 20}, cv::FONT_HERSHEY_SIMPLEX, 0.4, cv::Scalar(0, 0, 0), 1);
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", pmax);
    cv::putText(img, buf, {8, T + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45, blue, 1);
    std::snprintf(buf, sizeof buf, "%.1f", pmin);
    cv::putText(img, buf, {8, H - B}, cv::FONT_HERSHEY_SIMPLEX, 0.45, blue, 1);
    cv::putText(img, "100", {W - R + 8, T + 5}, cv::FONT_HERSHEY_SIMPLEX, 0.45, red, 1);
    cv::putText(img, "0", {W - R + 8, H - B}, cv::FONT_HERSHEY_SIMPLEX, 0.45, red, 1);
    cv::putText(img, "alpha", {W / 2 - 20, H - 15}, cv::FONT_HERSHEY_SIMPLEX, 0.5, cv::Scalar(0, 0, 0), 1);
    cv::putText(img, "PSNR (dB)", {L, T - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5, blue, 1);
    cv::putText(img, "PSR (%)", {W - R - 70, T - 12}, cv::FONT_HERSHEY_SIMPLEX, 0.5, red, 1);
    if (!cv::imwrite(path, img)) throw IoError("cannot write plot", path);
}

}  // namespace arfp
