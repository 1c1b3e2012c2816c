#pragma once

// Experiment configuration: one JSON tree file plus dotted-path overrides.

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "arfp/adversary.hpp"
#include "arfp/condnet.hpp"
#include "arfp/data.hpp"
#include "arfp/frmetrics.hpp"
#include "arfp/objectives.hpp"

namespace arfp {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct AblationToggles {
    bool arat = true;  // off: lambda_rev = 0
    bool kmb = true;   // off: key features removed from the condition embedding
    bool arr = true;   // off: lambda_mse = 0 and nonce auxiliary terms disabled
};

struct EvalConfig {
    std::vector<double> alpha_grid{0.01, 0.03, 0.05, 0.08, 0.15};
    std::vector<int> key_error_grid{0, 1, 16, -1};  // bit flips; -1 = independent random key
    bool alpha_sweep_retrain = false;               // false: rescale the trained mask
    int jpeg_quality = 75;
    double integrity_threshold = kDefaultIntegrityThreshold;
    NoncePolicy nonce_policy = NoncePolicy::Decode;
    PsrConfig psr;
    std::uint64_t seed = 7;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    ArchConfig arch;
    TrainConfig train;
    EmbedderConfig embedder;
    AttackConfig attacker;  // paired restorer used for attacked PSR and tamper rows
    AttackConfig purifier;  // blur- or noise-purifier for tamper rows
    AblationToggles ablation;
    EvalConfig eval;
    std::string output_dir = "out";
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    // FNV-1a of the canonical JSON dump, as 16 hex characters.
    std::string hash() const;
};

// "a.b.c=value"; value parsed as JSON when possible, otherwise kept as a string.
void apply_override(nlohmann::json& tree, const std::string& assignment);
// Reads the file (empty path = all defaults), applies overrides, validates.
// Any problem raises ConfigError.
ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace arfp
