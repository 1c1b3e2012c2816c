#pragma once

// Loss terms, the combined protector objective, and the alternating
// adversary / protector training schedule.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "arfp/adversary.hpp"
#include "arfp/condnet.hpp"
#include "arfp/dataset.hpp"
#include "arfp/frmetrics.hpp"
#include "arfp/optim.hpp"
#include "arfp/recovery.hpp"

namespace arfp {

struct LossWeights {
    double rec = 10.0;
    double id = 5.0;
    double mse = 1.0;
    double rev = 1.0;
    double l2 = kDefaultLambdaL2;
    void validate() const;
};

// Extra protector terms that make recovery and the nonce key- and
// tamper-sensitive. All zero disables them.
struct AuxWeights {
    double wrong_key = 0.0;          // hinge on recovery error under a 1-bit key flip
    double wrong_key_margin = 0.5;   // required mean |x - R(z, k')| per image
    double recovered_nonce = 0.0;    // D(x_hat) should still carry m
    double splice = 0.0;             // D(spliced z) should carry no nonce information
    void validate() const;
};

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double adversary_lr = 2e-4;
    int batch_size = 16;
    int cycles = 30;
    int rounds_per_cycle = 1;  // alternation rounds per cycle
    int adversary_steps = 1;   // per round, run first
    int protector_steps = 1;   // per round
    double alpha = 0.05;
    LossWeights weights;
    AuxWeights aux;
    Reduction reduction = Reduction::Mean;
    bool rev_floor_enabled = false;
    double rev_floor = -1.0;        // lower bound of the -lambda_rev * L_REV term when enabled
    bool key_features = true;       // false zeroes the key half of the condition embedding
    bool per_identity_keys = true;  // one key per identity label, else a fresh key per sample
    std::uint64_t key_seed = 1;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // cycles; 0 disables
    std::string checkpoint_dir;

    void validate() const;
};

// L1 distance ||x - x_hat||_1.
double rec_loss(const Tensor& x, const Tensor& x_hat);
Var rec_loss(const Var& x, const Var& x_hat, Reduction red);
// Cosine similarity of the embeddings of x and z (single images).
double id_loss(const Tensor& x, const Tensor& z, const ToyEmbedder& phi);
// Batch form: cosine per row, summed or averaged.
Var id_loss(const Var& x, const Var& z, const ToyEmbedder& phi, Reduction red);

struct LossBreakdown {
    double rec = 0, id = 0, mse = 0, rev = 0;
    double rev_term = 0;  // contribution of L_REV after the optional floor
    double aux = 0;       // weighted sum of auxiliary terms
    double total = 0;
};

// lambda_rec*rec + lambda_id*id + lambda_mse*mse - lambda_rev*rev, with the
// optional floor on the last term.
LossBreakdown combine_losses(double rec, double id, double mse, double rev, const LossWeights& w,
                             bool floor_enabled = false, double floor = -1.0);

struct TotalLoss {
    Var total;
    LossBreakdown parts;
};

// decoded [N,n_m] raw decoder outputs, m_signal [N,n_m] in {-1,+1}.
TotalLoss total_loss(const Var& x, const Var& z, const Var& x_hat, const Var& decoded, const Var& m_signal,
                     const Var& x_tilde, const LossWeights& w, const ToyEmbedder& phi, Reduction red = Reduction::Sum,
                     bool floor_enabled = false, double floor = -1.0);

struct ArfpModel {
    ArchConfig arch;
    Protector protector;  // E, G
    Recoverer recoverer;  // R, D
    Restorer adversary;   // A
    ArfpModel(const ArchConfig& a, std::uint64_t seed);
    std::uint64_t protector_hash() const;  // E, G, R, D
    std::uint64_t adversary_hash() const;
};

struct CycleRecord {
    int cycle = 0;
    double rec = 0, id = 0, mse = 0, rev = 0, total = 0;
};

struct TrainState {
    ArfpModel model;
    Adam opt_enc, opt_gen, opt_rec, opt_dec, opt_adv;
    long steps = 0;
    std::vector<CycleRecord> history;

    TrainState(const ArchConfig& arch, const TrainConfig& cfg);
    std::uint64_t hash() const;  // parameters and optimizer moments
};

// One training batch with every random draw fixed up front, so the losses are
// deterministic functions of the parameters.
struct Batch {
    Tensor x;                   // [N,3,S,S]
    std::vector<int> labels;
    std::vector<Bits> keys, nonces;
    std::vector<Bits> wrong_keys;     // keys with one flipped bit
    std::vector<Rect> splice_rects;
    std::vector<int> splice_donor;    // donor row per sample
    std::vector<Bits> splice_targets; // random nonce targets for spliced inputs
    int size() const { return x.rank() == 4 ? x.dim(0) : 0; }
};

Batch make_batch(const Dataset& data, const std::vector<int>& idx, const ArchConfig& arch, const TrainConfig& cfg,
                 Rng& rng);

// Condition embeddings for a batch, honoring cfg.key_features.
Var batch_condition(const ConditionEncoder& enc, const std::vector<Bits>& keys, const std::vector<Bits>& nonces,
                    bool key_features);
// z = clamp(x + alpha * G(x, e)).
Var protect_batch(const Var& x, const Var& e, double alpha, const CondImageNet& gen);

Var adversary_loss(const Batch& b, const TrainState& s, const TrainConfig& cfg);
TotalLoss protector_loss(const Batch& b, const TrainState& s, const TrainConfig& cfg, const ToyEmbedder& phi);

// Update A only, with the protector fixed. Returns L_REV before the update.
double adversary_step(const Batch& b, TrainState& s, const TrainConfig& cfg);
// Update E, G, R, D only, with A fixed. Returns the loss breakdown before the update.
LossBreakdown protector_step(const Batch& b, TrainState& s, const TrainConfig& cfg, const ToyEmbedder& phi);

using CycleCallback = std::function<void(const CycleRecord&)>;

// Alternating schedule over the dataset; deterministic given cfg.seed.
void train(TrainState& s, const Dataset& data, const TrainConfig& cfg, const ToyEmbedder& phi,
           const CycleCallback& on_cycle = {});

std::string history_csv(const std::vector<CycleRecord>& h);
void save_train_state(const std::string& path, const TrainState& s);
void load_train_state(const std::string& path, TrainState& s);

}  // namespace arfp
