// Command-line front end. Exit codes: 0 success, 1 invalid config or usage,
// 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arfp/checkpoint.hpp"
#include "arfp/errors.hpp"
#include "arfp/experiments.hpp"
#include "arfp/image_io.hpp"
#include "arfp/leakage.hpp"

namespace fs = std::filesystem;
using namespace arfp;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config,-c", c.config, "experiment config file (JSON)");
    sub->add_option("--set,-s", c.overrides, "override, e.g. train.cycles=10")->take_all();
}

std::string model_path(const ExperimentConfig& cfg) { return cfg.output_dir + "/model.ckpt"; }
std::string embedder_path(const ExperimentConfig& cfg) { return cfg.output_dir + "/embedder.ckpt"; }

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file", path);
    out << text;
}

void log(const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); }

struct Trained {
    ToyData data;
    ToyEmbedder phi;
    std::unique_ptr<TrainState> state;
};

Trained load_trained(const ExperimentConfig& cfg) {
    ToyData data = prepare_data(cfg);
    ToyEmbedder phi = load_embedder(embedder_path(cfg));
    return Trained{std::move(data), std::move(phi), load_model(cfg, model_path(cfg))};
}

int cmd_train(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    ToyData data = prepare_data(cfg);
    log("training embedder on " + std::to_string(data.reference.size()) + " reference images");
    ToyEmbedder phi = train_embedder(cfg, data);
    save_embedder(embedder_path(cfg), phi);
    TrainConfig tc = variant_config(cfg.train, cfg.ablation);
    tc.checkpoint_dir = cfg.output_dir + "/checkpoints";
    auto s = train_model(cfg, tc, data, phi, [](const CycleRecord& r) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "cycle %d rec %.4f id %.3f mse %.3f rev %.4f total %.4f", r.cycle, r.rec, r.id,
                      r.mse, r.rev, r.total);
        log(buf);
    });
    save_train_state(model_path(cfg), *s);
    write_text(cfg.output_dir + "/history.csv", history_csv(s->history));
    write_text(cfg.output_dir + "/config.json", cfg.to_json().dump(2) + "\n");
    std::printf("model %s state hash %s\n", model_path(cfg).c_str(), hex64(s->hash()).c_str());
    return 0;
}

int cmd_protect(const ExperimentConfig& cfg, const std::string& in, const std::string& out, std::uint64_t key_seed,
                std::uint64_t nonce_seed, double alpha) {
    auto s = load_model(cfg, model_path(cfg));
    const Tensor x = quantize_u8(read_image(in, cfg.arch.image_size));
    const SecretKey key = generate_key(key_seed, cfg.arch.key_bits);
    const Nonce nonce = generate_nonce(nonce_seed, cfg.arch.nonce_bits);
    const ProtectedImage z = protect(x, key, nonce, alpha < 0 ? cfg.train.alpha : alpha, s->model.protector);
    write_png(out, z.z);
    const nlohmann::json meta = {{"image", out},          {"source", fs::absolute(in).string()},
                                 {"alpha", z.alpha},      {"key_fingerprint", z.key_fingerprint},
                                 {"nonce_id", z.nonce_id}, {"config_hash", cfg.hash()}};
    write_text(out + ".json", meta.dump(2) + "\n");
    std::printf("wrote %s and %s.json\n", out.c_str(), out.c_str());
    return 0;
}

int cmd_recover(const ExperimentConfig& cfg, const std::string& in, const std::string& out, std::uint64_t key_seed,
                std::string reference) {
    auto s = load_model(cfg, model_path(cfg));
    const Tensor z = read_image(in, cfg.arch.image_size);
    const SecretKey key = generate_key(key_seed, cfg.arch.key_bits);
    nlohmann::json meta;
    if (fs::exists(in + ".json")) {
        std::ifstream m(in + ".json");
        meta = nlohmann::json::parse(m);
        if (reference.empty()) reference = meta.value("source", std::string());
    }
    const DecodedNonce d = decode_nonce(z, s->model.recoverer);
    Nonce nonce = d.bits;
    if (cfg.eval.nonce_policy == NoncePolicy::Provided) {
        if (!meta.contains("nonce_id")) throw std::runtime_error("nonce policy 'provided' needs the metadata file");
        nonce.bits = from_hex(meta["nonce_id"].get<std::string>(), cfg.arch.nonce_bits);
    }
    const Tensor xh = recover(z, key, nonce, s->model.protector.enc, s->model.recoverer);
    if (!out.empty()) write_png(out, xh);
    if (meta.contains("nonce_id")) {
        const Nonce expected{from_hex(meta["nonce_id"].get<std::string>(), cfg.arch.nonce_bits)};
        IntegrityVerdict v = verify_integrity(z, expected, s->model.recoverer, cfg.eval.integrity_threshold, in);
        std::printf("%s\n", v.to_json().dump().c_str());
    }
    if (!reference.empty()) {
        const Tensor x = quantize_u8(read_image(reference, cfg.arch.image_size));
        std::printf("PSNR(x_hat, x) = %.2f dB\n", psnr(xh, x));
    }
    return 0;
}

int cmd_attack(const ExperimentConfig& cfg) {
    Trained t = load_trained(cfg);
    const PairedAttacker a = train_attacker(cfg, *t.state, cfg.train, t.data);
    save_checkpoint(cfg.output_dir + "/attacker.ckpt", "attacker", {{"width", a.net.width()}}, {{"adv", &a.net.params}});
    const Gallery g = build_gallery(t.data.reference.images, t.data.reference.labels, t.phi);
    const ProtectedSet p = protect_dataset(*t.state, t.data.probe, cfg.train, cfg.train.alpha, cfg.eval.seed);
    MetricsReport r("attack", cfg.hash(), cfg.dataset.image_size);
    r.add("paired-restorer", "final_rev_loss", a.epoch_loss.back(), "mean", cfg.attacker.seed);
    r.add("paired-restorer", "attacked_psr", psr(restore_batch(a.net, p.z), p.labels, g, t.phi, cfg.eval.psr), "percent",
          cfg.attacker.seed);
    r.write(cfg.output_dir, "attack");
    std::cout << r.to_csv();
    return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg) {
    Trained t = load_trained(cfg);
    const TrainConfig tc = variant_config(cfg.train, cfg.ablation);
    const VariantEval e = evaluate_variant(cfg, *t.state, tc, t.data, t.phi);
    MetricsReport r("evaluate", cfg.hash(), cfg.dataset.image_size);
    r.add("model", "clean_psr", e.clean_psr, "percent", cfg.eval.seed);
    r.add("model", "attacked_psr", e.attacked_psr, "percent", cfg.eval.seed);
    r.add("model", "recovery_ssim", e.recovery_ssim, "ratio", cfg.eval.seed);
    r.add("model", "psnr_protected", e.psnr_z, "dB", cfg.eval.seed);
    r.add("model", "ssim_protected", e.ssim_z, "ratio", cfg.eval.seed);
    r.write(cfg.output_dir, "evaluate");
    std::cout << r.to_csv();
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    ToyData data = prepare_data(cfg);
    ToyEmbedder phi = train_embedder(cfg, data);
    const MetricsReport r = run_ablation(cfg, data, phi);
    r.write(cfg.output_dir, "ablation");
    std::cout << r.to_csv();
    return 0;
}

int cmd_key_sweep(const ExperimentConfig& cfg) {
    Trained t = load_trained(cfg);
    const MetricsReport r = run_key_sweep(cfg, *t.state, t.data);
    r.write(cfg.output_dir, "key_sweep");
    std::cout << r.to_csv();
    return 0;
}

int cmd_tamper(const ExperimentConfig& cfg) {
    Trained t = load_trained(cfg);
    const MetricsReport r = run_tamper_suite(cfg, *t.state, t.data);
    r.write(cfg.output_dir, "tamper");
    std::cout << r.to_csv();
    return 0;
}

int cmd_alpha_sweep(const ExperimentConfig& cfg) {
    Trained t = load_trained(cfg);
    const MetricsReport r = run_alpha_sweep(cfg, *t.state, t.data, t.phi);
    r.write(cfg.output_dir, "alpha_sweep");
    write_text(cfg.output_dir + "/alpha_sweep_tradeoff.csv", alpha_sweep_csv(r, cfg.eval.alpha_grid));
    std::vector<double> ps, pr;
    for (double a : cfg.eval.alpha_grid) {
        ps.push_back(r.value(alpha_condition(a), "psnr"));
        pr.push_back(r.value(alpha_condition(a), "psr"));
    }
    write_alpha_plot(cfg.output_dir + "/alpha_sweep.png", cfg.eval.alpha_grid, ps, pr);
    std::cout << r.to_csv();
    return 0;
}

int cmd_leakage(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    const std::string csv = leakage_csv(leakage_demo(11));
    write_text(cfg.output_dir + "/leakage_demo.csv", csv);
    std::cout << csv;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Key-conditioned face protection: training, protection, recovery and evaluation"};
    app.require_subcommand(1);
    Common c;
    std::string in, out, reference;
    std::uint64_t key_seed = 0, nonce_seed = 0;
    double alpha = -1.0;

    const std::vector<std::pair<std::string, std::string>> names = {
        {"train", "train the embedder and the protection model"},
        {"protect", "protect one image"},
        {"recover", "recover one protected image with a key"},
        {"attack", "train a paired restoration attacker and report attacked PSR"},
        {"evaluate", "clean / attacked PSR, recovery SSIM and image quality"},
        {"ablate", "train and evaluate the four ablation variants"},
        {"key-sweep", "recovery quality and nonce BER versus key errors"},
        {"tamper", "nonce BER under benign and tampering operations"},
        {"alpha-sweep", "protection / quality trade-off over the alpha grid"},
        {"leakage-demo", "mutual information versus MMSE on the discrete demo family"}};
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, desc] : names) {
        CLI::App* s = app.add_subcommand(name, desc);
        add_common(s, c);
        subs[name] = s;
    }
    subs["protect"]->add_option("--in", in, "input image")->required();
    subs["protect"]->add_option("--out", out, "output PNG")->required();
    subs["protect"]->add_option("--key-seed", key_seed, "seed of the secret key")->required();
    subs["protect"]->add_option("--nonce-seed", nonce_seed, "seed of the nonce");
    subs["protect"]->add_option("--alpha", alpha, "perturbation budget (default: config train.alpha)");
    subs["recover"]->add_option("--in", in, "protected image")->required();
    subs["recover"]->add_option("--key-seed", key_seed, "seed of the secret key")->required();
    subs["recover"]->add_option("--out", out, "recovered PNG");
    subs["recover"]->add_option("--reference", reference, "original image for PSNR (default: from metadata)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        if (dynamic_cast<const CLI::ExtrasError*>(&e) || app.get_subcommands().empty()) std::cerr << app.help();
        return 1;
    }

    ExperimentConfig cfg;
    try {
        cfg = load_config(c.config, c.overrides);
    } catch (const std::exception& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return 1;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "train") return cmd_train(cfg);
        if (cmd == "protect") return cmd_protect(cfg, in, out, key_seed, nonce_seed, alpha);
        if (cmd == "recover") return cmd_recover(cfg, in, out, key_seed, reference);
        if (cmd == "attack") return cmd_attack(cfg);
        if (cmd == "evaluate") return cmd_evaluate(cfg);
        if (cmd == "ablate") return cmd_ablate(cfg);
        if (cmd == "key-sweep") return cmd_key_sweep(cfg);
        if (cmd == "tamper") return cmd_tamper(cfg);
        if (cmd == "alpha-sweep") return cmd_alpha_sweep(cfg);
        if (cmd == "leakage-demo") return cmd_leakage(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::cerr << app.help();
    return 1;
}
