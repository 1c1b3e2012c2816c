#include "arfp/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace arfp {

namespace {

using json = nlohmann::json;

json train_to_json(const TrainConfig& t) {
    return {{"lr", t.lr},
            {"beta1", t.beta1},
            {"adversary_lr", t.adversary_lr},
            {"batch_size", t.batch_size},
            {"cycles", t.cycles},
            {"rounds_per_cycle", t.rounds_per_cycle},
            {"adversary_steps", t.adversary_steps},
            {"protector_steps", t.protector_steps},
            {"alpha", t.alpha},
            {"weights",
             {{"rec", t.weights.rec}, {"id", t.weights.id}, {"mse", t.weights.mse}, {"rev", t.weights.rev},
              {"l2", t.weights.l2}}},
            {"aux",
             {{"wrong_key", t.aux.wrong_key},
              {"wrong_key_margin", t.aux.wrong_key_margin},
              {"recovered_nonce", t.aux.recovered_nonce},
              {"splice", t.aux.splice}}},
            {"reduction", t.reduction == Reduction::Mean ? "mean" : "sum"},
            {"rev_floor_enabled", t.rev_floor_enabled},
            {"rev_floor", t.rev_floor},
            {"per_identity_keys", t.per_identity_keys},
            {"key_seed", t.key_seed},
            {"seed", t.seed},
            {"checkpoint_every", t.checkpoint_every}};
}

TrainConfig train_from_json(const json& j) {
    TrainConfig t;
    t.lr = j.value("lr", t.lr);
    t.beta1 = j.value("beta1", t.beta1);
    t.adversary_lr = j.value("adversary_lr", t.adversary_lr);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.cycles = j.value("cycles", t.cycles);
    t.rounds_per_cycle = j.value("rounds_per_cycle", t.rounds_per_cycle);
    t.adversary_steps = j.value("adversary_steps", t.adversary_steps);
    t.protector_steps = j.value("protector_steps", t.protector_steps);
    t.alpha = j.value("alpha", t.alpha);
    const json w = j.value("weights", json::object());
    t.weights.rec = w.value("rec", t.weights.rec);
    t.weights.id = w.value("id", t.weights.id);
    t.weights.mse = w.value("mse", t.weights.mse);
    t.weights.rev = w.value("rev", t.weights.rev);
    t.weights.l2 = w.value("l2", t.weights.l2);
    const json a = j.value("aux", json::object());
    t.aux.wrong_key = a.value("wrong_key", t.aux.wrong_key);
    t.aux.wrong_key_margin = a.value("wrong_key_margin", t.aux.wrong_key_margin);
    t.aux.recovered_nonce = a.value("recovered_nonce", t.aux.recovered_nonce);
    t.aux.splice = a.value("splice", t.aux.splice);
    const std::string red = j.value("reduction", std::string("mean"));
    if (red != "mean" && red != "sum") throw ConfigError("train.reduction must be 'mean' or 'sum'");
    t.reduction = red == "mean" ? Reduction::Mean : Reduction::Sum;
    t.rev_floor_enabled = j.value("rev_floor_enabled", t.rev_floor_enabled);
    t.rev_floor = j.value("rev_floor", t.rev_floor);
    t.per_identity_keys = j.value("per_identity_keys", t.per_identity_keys);
    t.key_seed = j.value("key_seed", t.key_seed);
    t.seed = j.value("seed", t.seed);
    t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
    return t;
}

json attack_to_json(const AttackConfig& a) {
    return {{"family", to_string(a.family)}, {"batch_size", a.batch_size}, {"lr", a.lr},
            {"decay", a.decay},              {"decay_every", a.decay_every}, {"epochs", a.epochs},
            {"seed", a.seed},                {"width", a.width},          {"lambda_l2", a.lambda_l2},
            {"strength", a.strength}};
}

AttackConfig attack_from_json(const json& j, AttackConfig a) {
    if (j.contains("family")) a.family = attack_family_from_string(j.at("family").get<std::string>());
    a.batch_size = j.value("batch_size", a.batch_size);
    a.lr = j.value("lr", a.lr);
    a.decay = j.value("decay", a.decay);
    a.decay_every = j.value("decay_every", a.decay_every);
    a.epochs = j.value("epochs", a.epochs);
    a.seed = j.value("seed", a.seed);
    a.width = j.value("width", a.width);
    a.lambda_l2 = j.value("lambda_l2", a.lambda_l2);
    a.strength = j.value("strength", a.strength);
    return a;
}

AttackConfig default_purifier() {
    AttackConfig p;
    p.family = AttackFamily::BlurPurifier;
    p.strength = 1.0;
    return p;
}

}  // namespace

void ExperimentConfig::validate() const {
    dataset.validate();
    arch.validate();
    train.validate();
    attacker.validate();
    purifier.validate();
    if (arch.image_size != dataset.image_size)
        throw ConfigError("arch.image_size must equal dataset.image_size");
    if (attacker.family != AttackFamily::PairedRestorer) throw ConfigError("attacker.family must be paired-restorer");
    if (purifier.family == AttackFamily::PairedRestorer) throw ConfigError("purifier.family must be a purifier");
    if (eval.alpha_grid.empty() || eval.key_error_grid.empty()) throw ConfigError("evaluation grids must be non-empty");
    for (double a : eval.alpha_grid)
        if (!(a >= 0.0)) throw ConfigError("alpha grid values must be >= 0");
    for (int k : eval.key_error_grid)
        if (k < -1 || k > arch.key_bits) throw ConfigError("key error grid entries must lie in [-1, key_bits]");
    if (eval.jpeg_quality < 1 || eval.jpeg_quality > 100) throw ConfigError("eval.jpeg_quality must lie in [1, 100]");
    if (!(eval.integrity_threshold > 0.0 && eval.integrity_threshold < 0.5))
        throw ConfigError("eval.integrity_threshold must lie in (0, 0.5)");
    if (embedder.epochs < 1 || embedder.batch_size < 1 || !(embedder.lr > 0.0) || embedder.embed_dim < 1)
        throw ConfigError("invalid embedder schedule");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

json ExperimentConfig::to_json() const {
    json ev = {{"alpha_grid", eval.alpha_grid},
               {"key_error_grid", eval.key_error_grid},
               {"alpha_sweep_mode", eval.alpha_sweep_retrain ? "retrain" : "rescale"},
               {"jpeg_quality", eval.jpeg_quality},
               {"integrity_threshold", eval.integrity_threshold},
               {"nonce_policy", eval.nonce_policy == NoncePolicy::Decode ? "decode" : "provided"},
               {"psr_mode", eval.psr.mode == PsrMode::ClosedSet ? "closed-set" : "verification"},
               {"psr_threshold", eval.psr.threshold},
               {"seed", eval.seed}};
    return {{"dataset", dataset.to_json()},
            {"arch", arch.to_json()},
            {"train", train_to_json(train)},
            {"embedder",
             {{"embed_dim", embedder.embed_dim},
              {"epochs", embedder.epochs},
              {"batch_size", embedder.batch_size},
              {"lr", embedder.lr},
              {"seed", embedder.seed}}},
            {"attacker", attack_to_json(attacker)},
            {"purifier", attack_to_json(purifier)},
            {"ablation", {{"arat", ablation.arat}, {"kmb", ablation.kmb}, {"arr", ablation.arr}}},
            {"eval", ev},
            {"output_dir", output_dir},
            {"seed", seed}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    static const std::vector<std::string> known = {"dataset", "arch",     "train",    "embedder",   "attacker",
                                                   "purifier", "ablation", "eval",     "output_dir", "seed"};
    if (!j.is_object()) throw ConfigError("config root must be an object");
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config section '" + k + "'");
    try {
        ExperimentConfig c;
        c.dataset = DatasetSpec::from_json(j.value("dataset", json::object()));
        json arch = j.value("arch", json::object());
        if (!arch.contains("image_size")) arch["image_size"] = c.dataset.image_size;
        c.arch = ArchConfig::from_json(arch);
        c.train = train_from_json(j.value("train", json::object()));
        const json e = j.value("embedder", json::object());
        c.embedder.embed_dim = e.value("embed_dim", c.embedder.embed_dim);
        c.embedder.epochs = e.value("epochs", c.embedder.epochs);
        c.embedder.batch_size = e.value("batch_size", c.embedder.batch_size);
        c.embedder.lr = e.value("lr", c.embedder.lr);
        c.embedder.seed = e.value("seed", c.embedder.seed);
        c.attacker = attack_from_json(j.value("attacker", json::object()), AttackConfig{});
        c.purifier = attack_from_json(j.value("purifier", json::object()), default_purifier());
        const json ab = j.value("ablation", json::object());
        c.ablation.arat = ab.value("arat", true);
        c.ablation.kmb = ab.value("kmb", true);
        c.ablation.arr = ab.value("arr", true);
        const json ev = j.value("eval", json::object());
        c.eval.alpha_grid = ev.value("alpha_grid", c.eval.alpha_grid);
        c.eval.key_error_grid = ev.value("key_error_grid", c.eval.key_error_grid);
        const std::string mode = ev.value("alpha_sweep_mode", std::string("rescale"));
        if (mode != "rescale" && mode != "retrain") throw ConfigError("eval.alpha_sweep_mode must be rescale or retrain");
        c.eval.alpha_sweep_retrain = mode == "retrain";
        c.eval.jpeg_quality = ev.value("jpeg_quality", c.eval.jpeg_quality);
        c.eval.integrity_threshold = ev.value("integrity_threshold", c.eval.integrity_threshold);
        const std::string pol = ev.value("nonce_policy", std::string("decode"));
        if (pol != "decode" && pol != "provided") throw ConfigError("eval.nonce_policy must be decode or provided");
        c.eval.nonce_policy = pol == "decode" ? NoncePolicy::Decode : NoncePolicy::Provided;
        const std::string psr = ev.value("psr_mode", std::string("closed-set"));
        if (psr != "closed-set" && psr != "verification") throw ConfigError("eval.psr_mode must be closed-set or verification");
        c.eval.psr.mode = psr == "closed-set" ? PsrMode::ClosedSet : PsrMode::Verification;
        c.eval.psr.threshold = ev.value("psr_threshold", c.eval.psr.threshold);
        c.eval.seed = ev.value("seed", c.eval.seed);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.seed = j.value("seed", c.seed);
        c.validate();
        return c;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError(ex.what());
    }
}

std::string ExperimentConfig::hash() const {
    const std::string s = to_json().dump();
    return hex64(fnv1a(s.data(), s.size()));
}

void apply_override(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::parse_error&) {
        value = text;
    }
    json* node = &tree;
    std::stringstream ss(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
        if (part.empty()) throw ConfigError("empty component in override path: " + path);
        parts.push_back(part);
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + path);
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("override path crosses a non-object: " + path);
    (*node)[parts.back()] = value;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    json tree = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path);
        try {
            tree = json::parse(in, nullptr, true, true);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
        }
    }
    for (const std::string& o : overrides) apply_override(tree, o);
    return ExperimentConfig::from_json(tree);
}

}  // namespace arfp
