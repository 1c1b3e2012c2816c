#include "arfp/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "arfp/checkpoint.hpp"
#include "arfp/errors.hpp"

namespace arfp {

void LossWeights::validate() const {
    for (double v : {rec, id, mse, rev, l2})
        if (!(v >= 0.0)) throw std::invalid_argument("loss weights must be >= 0");
}

void AuxWeights::validate() const {
    for (double v : {wrong_key, wrong_key_margin, recovered_nonce, splice})
        if (!(v >= 0.0)) throw std::invalid_argument("auxiliary loss weights must be >= 0");
}

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !(adversary_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (batch_size < 1 || cycles < 1 || rounds_per_cycle < 1 || adversary_steps < 1 || protector_steps < 1)
        throw std::invalid_argument("training counts must be positive");
    if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
    if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
    if (rev_floor_enabled && rev_floor > 0.0) throw std::invalid_argument("rev_floor must be <= 0");
    weights.validate();
    aux.validate();
}

double rec_loss(const Tensor& x, const Tensor& x_hat) {
    if (!x.same_shape(x_hat)) throw std::invalid_argument("rec_loss: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::fabs(x[i] - x_hat[i]);
    return s;
}

Var rec_loss(const Var& x, const Var& x_hat, Reduction red) {
    if (x.shape() != x_hat.shape()) throw std::invalid_argument("rec_loss: shape mismatch");
    return reduce(abs(sub(x, x_hat)), red);
}

double id_loss(const Tensor& x, const Tensor& z, const ToyEmbedder& phi) {
    return cosine_sim(embed(x, phi), embed(z, phi));
}

Var id_loss(const Var& x, const Var& z, const ToyEmbedder& phi, Reduction red) {
    return reduce(cosine_rows(phi.features(x), phi.features(z)), red);
}

LossBreakdown combine_losses(double rec, double id, double mse, double rev, const LossWeights& w, bool floor_enabled,
                             double floor) {
    w.validate();
    LossBreakdown b{rec, id, mse, rev, -w.rev * rev, 0.0, 0.0};
    if (floor_enabled) b.rev_term = std::max(b.rev_term, floor);
    b.total = w.rec * rec + w.id * id + w.mse * mse + b.rev_term;
    return b;
}

TotalLoss total_loss(const Var& x, const Var& z, const Var& x_hat, const Var& decoded, const Var& m_signal,
                     const Var& x_tilde, const LossWeights& w, const ToyEmbedder& phi, Reduction red,
                     bool floor_enabled, double floor) {
    w.validate();
    Var lrec = rec_loss(x, x_hat, red);
    Var lid = id_loss(x, z, phi, red);
    if (decoded.shape() != m_signal.shape()) throw std::invalid_argument("total_loss: decoded/nonce shape mismatch");
    Var lmse = reduce(square(sub(decoded, m_signal)), red);
    Var total = add(add(scale(lrec, w.rec), scale(lid, w.id)), scale(lmse, w.mse));
    double rev = 0.0;
    if (x_tilde.defined()) {
        Var lrev = rev_loss(x, x_tilde, w.l2, red);
        rev = lrev.value()[0];
        Var term = scale(lrev, -w.rev);
        if (floor_enabled) term = clamp(term, floor, std::numeric_limits<double>::infinity());
        total = add(total, term);
    }
    TotalLoss out;
    out.parts = combine_losses(lrec.value()[0], lid.value()[0], lmse.value()[0], rev, w, floor_enabled, floor);
    out.total = total;
    return out;
}

ArfpModel::ArfpModel(const ArchConfig& a, std::uint64_t seed)
    : arch(a), protector(a, seed), recoverer(a, seed), adversary([&] {
          Rng r(seed, 5);
          return Restorer(a.adversary_width, r, "adv");
      }()) {}

std::uint64_t ArfpModel::protector_hash() const {
    return hash_params({&protector.enc.params, &protector.gen.params, &recoverer.rec.params, &recoverer.dec.params});
}

std::uint64_t ArfpModel::adversary_hash() const { return adversary.params.hash(); }

TrainState::TrainState(const ArchConfig& arch, const TrainConfig& cfg) : model(arch, cfg.seed) {
    cfg.validate();
    const AdamConfig p{cfg.lr, cfg.beta1, 0.999, 1e-8}, a{cfg.adversary_lr, cfg.beta1, 0.999, 1e-8};
    opt_enc = Adam(model.protector.enc.params, p);
    opt_gen = Adam(model.protector.gen.params, p);
    opt_rec = Adam(model.recoverer.rec.params, p);
    opt_dec = Adam(model.recoverer.dec.params, p);
    opt_adv = Adam(model.adversary.params, a);
}

std::uint64_t TrainState::hash() const {
    std::uint64_t h = model.protector_hash() ^ (model.adversary_hash() * 0x9e3779b97f4a7c15ULL);
    for (const Adam* o : {&opt_enc, &opt_gen, &opt_rec, &opt_dec, &opt_adv}) h = splitmix64(h ^ o->hash());
    return splitmix64(h ^ static_cast<std::uint64_t>(steps));
}

namespace {

Bits random_bits(Rng& rng, int n) {
    Bits b(static_cast<std::size_t>(n));
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return b;
}

}  // namespace

Batch make_batch(const Dataset& data, const std::vector<int>& idx, const ArchConfig& arch, const TrainConfig& cfg,
                 Rng& rng) {
    if (idx.empty()) throw std::invalid_argument("make_batch: empty batch");
    Batch b;
    b.x = take_rows(data.images, idx);
    for (int i : idx) b.labels.push_back(data.labels[static_cast<std::size_t>(i)]);
    const int n = b.size();
    for (int i = 0; i < n; ++i) {
        b.keys.push_back(cfg.per_identity_keys
                             ? identity_key(cfg.key_seed, b.labels[static_cast<std::size_t>(i)], arch.key_bits).bits
                             : random_bits(rng, arch.key_bits));
        b.nonces.push_back(random_bits(rng, arch.nonce_bits));
        Bits wk = b.keys.back();
        wk[rng.below(wk.size())] ^= 1;
        b.wrong_keys.push_back(std::move(wk));
        b.splice_rects.push_back(random_splice_rect(arch.image_size, rng));
        b.splice_donor.push_back((i + 1) % n);
        b.splice_targets.push_back(random_bits(rng, arch.nonce_bits));
    }
    return b;
}

Var batch_condition(const ConditionEncoder& enc, const std::vector<Bits>& keys, const std::vector<Bits>& nonces,
                    bool key_features) {
    return enc(Var(signal_batch(keys)), Var(signal_batch(nonces)), key_features);
}

Var protect_batch(const Var& x, const Var& e, double alpha, const CondImageNet& gen) {
    return clamp(add(x, scale(gen(x, e), alpha)), -1.0, 1.0);
}

Var adversary_loss(const Batch& b, const TrainState& s, const TrainConfig& cfg) {
    if (b.size() == 0) throw std::invalid_argument("adversary step: empty batch");
    const ArfpModel& m = s.model;
    Var z;
    {
        NoGradGuard ng;
        Var e = batch_condition(m.protector.enc, b.keys, b.nonces, cfg.key_features);
        z = protect_batch(Var(b.x), e, cfg.alpha, m.protector.gen);
    }
    return rev_loss(Var(b.x), m.adversary(Var(z.value())), cfg.weights.l2, cfg.reduction);
}

TotalLoss protector_loss(const Batch& b, const TrainState& s, const TrainConfig& cfg, const ToyEmbedder& phi) {
    if (b.size() == 0) throw std::invalid_argument("protector step: empty batch");
    const ArfpModel& m = s.model;
    const LossWeights& w = cfg.weights;
    Var x(b.x);
    Var e = batch_condition(m.protector.enc, b.keys, b.nonces, cfg.key_features);
    Var z = protect_batch(x, e, cfg.alpha, m.protector.gen);
    Var x_hat = m.recoverer.rec(z, e);
    Var decoded = m.recoverer.dec(z);
    Var msig(signal_batch(b.nonces));
    Var x_tilde = w.rev > 0.0 ? m.adversary(z) : Var();
    TotalLoss tl = total_loss(x, z, x_hat, decoded, msig, x_tilde, w, phi, cfg.reduction, cfg.rev_floor_enabled,
                              cfg.rev_floor);
    const AuxWeights& aux = cfg.aux;
    Var extra;
    auto accumulate = [&](const Var& term, double weight) {
        Var t = scale(term, weight);
        extra = extra.defined() ? add(extra, t) : t;
    };
    if (aux.wrong_key > 0.0) {
        Var ew = batch_condition(m.protector.enc, b.wrong_keys, b.nonces, cfg.key_features);
        Var xw = m.recoverer.rec(detach(z), ew);
        Var gap = add_scalar(scale(mean_per_sample(abs(sub(x, xw))), -1.0), aux.wrong_key_margin);
        accumulate(reduce(relu(gap), cfg.reduction), aux.wrong_key);
    }
    if (aux.recovered_nonce > 0.0)
        accumulate(reduce(square(sub(m.recoverer.dec(x_hat), msig)), cfg.reduction), aux.recovered_nonce);
    if (aux.splice > 0.0) {
        const Tensor mask = splice_mask(b.splice_rects, m.arch.image_size);
        Tensor inv(mask.shape());
        for (std::size_t i = 0; i < mask.size(); ++i) inv[i] = 1.0 - mask[i];
        Var zs = add(mul(z, Var(inv)), mul(take_rows(z, b.splice_donor), Var(mask)));
        accumulate(reduce(square(sub(m.recoverer.dec(zs), Var(signal_batch(b.splice_targets)))), cfg.reduction),
                   aux.splice);
    }
    if (extra.defined()) {
        tl.parts.aux = extra.value()[0];
        tl.parts.total += tl.parts.aux;
        tl.total = add(tl.total, extra);
    }
    return tl;
}

double adversary_step(const Batch& b, TrainState& s, const TrainConfig& cfg) {
    s.model.adversary.params.zero_grad();
    Var loss = adversary_loss(b, s, cfg);
    backward(loss);
    s.opt_adv.step(s.model.adversary.params);
    s.model.adversary.params.zero_grad();
    ++s.steps;
    return loss.value()[0];
}

LossBreakdown protector_step(const Batch& b, TrainState& s, const TrainConfig& cfg, const ToyEmbedder& phi) {
    ArfpModel& m = s.model;
    for (ParamSet* p : {&m.protector.enc.params, &m.protector.gen.params, &m.recoverer.rec.params,
                        &m.recoverer.dec.params, &m.adversary.params})
        p->zero_grad();
    TotalLoss tl = protector_loss(b, s, cfg, phi);
    backward(tl.total);
    s.opt_enc.step(m.protector.enc.params);
    s.opt_gen.step(m.protector.gen.params);
    s.opt_rec.step(m.recoverer.rec.params);
    s.opt_dec.step(m.recoverer.dec.params);
    m.adversary.params.zero_grad();
    ++s.steps;
    return tl.parts;
}

namespace {

Batch draw_batch(const Dataset& data, const TrainState& s, const TrainConfig& cfg, Rng& rng) {
    std::vector<int> idx;
    for (int i = 0; i < cfg.batch_size; ++i) idx.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(data.size()))));
    return make_batch(data, idx, s.model.arch, cfg, rng);
}

}  // namespace

void train(TrainState& s, const Dataset& data, const TrainConfig& cfg, const ToyEmbedder& phi,
           const CycleCallback& on_cycle) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (data.image_size() != s.model.arch.image_size)
        throw std::invalid_argument("train: dataset image size does not match the architecture");
    Rng rng(cfg.seed, 31);
    const int first = static_cast<int>(s.history.size());
    for (int c = 0; c < cfg.cycles; ++c) {
        CycleRecord rec;
        rec.cycle = first + c + 1;
        int n = 0;
        for (int r = 0; r < cfg.rounds_per_cycle; ++r) {
            for (int k = 0; k < cfg.adversary_steps; ++k) adversary_step(draw_batch(data, s, cfg, rng), s, cfg);
            for (int k = 0; k < cfg.protector_steps; ++k) {
                const LossBreakdown p = protector_step(draw_batch(data, s, cfg, rng), s, cfg, phi);
                rec.rec += p.rec;
                rec.id += p.id;
                rec.mse += p.mse;
                rec.rev += p.rev;
                rec.total += p.total;
                ++n;
            }
        }
        for (double* v : {&rec.rec, &rec.id, &rec.mse, &rec.rev, &rec.total}) *v /= n;
        s.history.push_back(rec);
        if (on_cycle) on_cycle(rec);
        if (cfg.checkpoint_every > 0 && rec.cycle % cfg.checkpoint_every == 0) {
            const std::filesystem::path dir = cfg.checkpoint_dir.empty() ? "." : cfg.checkpoint_dir;
            std::filesystem::create_directories(dir);
            save_train_state((dir / ("train_cycle_" + std::to_string(rec.cycle) + ".ckpt")).string(), s);
        }
    }
}

std::string history_csv(const std::vector<CycleRecord>& h) {
    std::string out = "cycle,L_rec,L_id,L_MSE,L_REV,total\n";
    char buf[256];
    for (const CycleRecord& r : h) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.cycle, r.rec, r.id, r.mse, r.rev, r.total);
        out += buf;
    }
    return out;
}

namespace {

// Optimizer moments stored as parameter groups named after the parameters.
ParamSet moments_as_params(const ParamSet& like, const std::vector<Tensor>& moments) {
    ParamSet ps;
    for (std::size_t i = 0; i < like.size(); ++i)
        ps.add(like.name(i), i < moments.size() ? moments[i] : Tensor(like.var(i).shape()));
    return ps;
}

}  // namespace

void save_train_state(const std::string& path, const TrainState& s) {
    const ArfpModel& m = s.model;
    const std::vector<std::pair<std::string, const ParamSet*>> sets = {
        {"enc", &m.protector.enc.params}, {"gen", &m.protector.gen.params}, {"rec", &m.recoverer.rec.params},
        {"dec", &m.recoverer.dec.params}, {"adv", &m.adversary.params}};
    const std::vector<const Adam*> opts = {&s.opt_enc, &s.opt_gen, &s.opt_rec, &s.opt_dec, &s.opt_adv};
    std::vector<ParamSet> moment_sets;
    moment_sets.reserve(2 * sets.size());
    nlohmann::json meta = {{"arch", m.arch.to_json()}, {"steps", s.steps}};
    for (std::size_t i = 0; i < sets.size(); ++i) {
        moment_sets.push_back(moments_as_params(*sets[i].second, opts[i]->first_moments()));
        moment_sets.push_back(moments_as_params(*sets[i].second, opts[i]->second_moments()));
        meta["opt_steps"][sets[i].first] = opts[i]->steps();
    }
    nlohmann::json hist = nlohmann::json::array();
    for (const CycleRecord& r : s.history) hist.push_back({r.cycle, r.rec, r.id, r.mse, r.rev, r.total});
    meta["history"] = hist;
    std::vector<std::pair<std::string, const ParamSet*>> groups = sets;
    for (std::size_t i = 0; i < sets.size(); ++i) {
        groups.emplace_back("opt." + sets[i].first + ".m", &moment_sets[2 * i]);
        groups.emplace_back("opt." + sets[i].first + ".v", &moment_sets[2 * i + 1]);
    }
    save_checkpoint(path, "train-state", meta, groups);
}

void load_train_state(const std::string& path, TrainState& s) {
    const Checkpoint ck = read_checkpoint(path);
    if (ck.kind != "train-state") throw IoError("checkpoint is not a training state", path);
    ArfpModel& m = s.model;
    if (ck.arch.at("arch") != m.arch.to_json()) throw IoError("checkpoint architecture does not match", path);
    const std::vector<std::pair<std::string, ParamSet*>> sets = {
        {"enc", &m.protector.enc.params}, {"gen", &m.protector.gen.params}, {"rec", &m.recoverer.rec.params},
        {"dec", &m.recoverer.dec.params}, {"adv", &m.adversary.params}};
    const std::vector<Adam*> opts = {&s.opt_enc, &s.opt_gen, &s.opt_rec, &s.opt_dec, &s.opt_adv};
    for (std::size_t i = 0; i < sets.size(); ++i) {
        restore_group(ck, sets[i].first, *sets[i].second);
        auto take = [&](const std::string& g) {
            std::vector<Tensor> out;
            auto it = ck.groups.find(g);
            if (it == ck.groups.end()) throw IoError("checkpoint lacks group " + g, path);
            for (const auto& [n, t] : it->second) out.push_back(t);
            return out;
        };
        opts[i]->first_moments() = take("opt." + sets[i].first + ".m");
        opts[i]->second_moments() = take("opt." + sets[i].first + ".v");
        opts[i]->set_steps(ck.arch.at("opt_steps").at(sets[i].first).get<long>());
    }
    s.steps = ck.arch.at("steps").get<long>();
    s.history.clear();
    for (const auto& r : ck.arch.at("history"))
        s.history.push_back({r[0].get<int>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(),
                             r[4].get<double>(), r[5].get<double>()});
}

}  // namespace arfp
