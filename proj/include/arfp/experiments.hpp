#pragma once

// Canned experiment protocols over the toy benchmark: model training and
// evaluation, ablation, key sweep, tamper suite and alpha sweep.

#include <memory>
#include <string>
#include <vector>

#include "arfp/config.hpp"
#include "arfp/report.hpp"

namespace arfp {

struct ToyData {
    Dataset all, reference, probe;
};

ToyData prepare_data(const ExperimentConfig& cfg);
// Trained on the reference split; frozen afterwards.
ToyEmbedder train_embedder(const ExperimentConfig& cfg, const ToyData& data);
void save_embedder(const std::string& path, const ToyEmbedder& phi);
ToyEmbedder load_embedder(const std::string& path);

// Training config with the ablation toggles applied.
TrainConfig variant_config(const TrainConfig& base, const AblationToggles& t);
std::unique_ptr<TrainState> train_model(const ExperimentConfig& cfg, const TrainConfig& tc, const ToyData& data,
                                        const ToyEmbedder& phi, const CycleCallback& on_cycle = {});
std::unique_ptr<TrainState> load_model(const ExperimentConfig& cfg, const std::string& path);

struct ProtectedSet {
    Tensor x, z;
    std::vector<int> labels;
    std::vector<Bits> keys, nonces;
};

// Protects every image with its identity key and a fresh random nonce.
ProtectedSet protect_dataset(const TrainState& s, const Dataset& data, const TrainConfig& tc, double alpha,
                             std::uint64_t seed);
Tensor recover_batch(const TrainState& s, const Tensor& z, const std::vector<Bits>& keys,
                     const std::vector<Bits>& nonces, bool key_features = true);
std::vector<Bits> decode_batch(const TrainState& s, const Tensor& z);
double mean_ber(const std::vector<Bits>& truth, const std::vector<Bits>& decoded);

// Paired attacker trained on (z, x) pairs of the reference split.
PairedAttacker train_attacker(const ExperimentConfig& cfg, const TrainState& s, const TrainConfig& tc,
                              const ToyData& data);
Tensor restore_batch(const Restorer& a, const Tensor& z);

struct VariantEval {
    double clean_psr = 0, attacked_psr = 0, recovery_ssim = 0, psnr_z = 0, ssim_z = 0;
};
VariantEval evaluate_variant(const ExperimentConfig& cfg, const TrainState& s, const TrainConfig& tc,
                             const ToyData& data, const ToyEmbedder& phi);

MetricsReport run_ablation(const ExperimentConfig& cfg, const ToyData& data, const ToyEmbedder& phi);
MetricsReport run_key_sweep(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data);
MetricsReport run_tamper_suite(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data);
MetricsReport run_alpha_sweep(const ExperimentConfig& cfg, const TrainState& s, const ToyData& data,
                              const ToyEmbedder& phi);
std::string alpha_sweep_csv(const MetricsReport& r, const std::vector<double>& alphas);
void write_alpha_plot(const std::string& path, const std::vector<double>& alphas, const std::vector<double>& psnr,
                      const std::vector<double>& psr);

// Condition label used for key-sweep rows: "HD=<flips>" or "HD=random".
std::string key_condition(int flips);
std::string alpha_condition(double alpha);

}  // namespace arfp
