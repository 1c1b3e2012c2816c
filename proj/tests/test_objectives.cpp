#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <memory>
#include <stdexcept>

#include "arfp/objectives.hpp"
#include "support.hpp"

using namespace arfp;
using arfp::test::random_tensor;
using arfp::test::tiny_arch;

TEST(CombineLosses, WeightedSumIsAdditive) {
    const LossWeights w{10, 5, 2, 1.5, 0.5};
    const LossBreakdown b = combine_losses(0.3, 0.8, 1.2, 0.4, w);
    EXPECT_NEAR(b.total, 10 * 0.3 + 5 * 0.8 + 2 * 1.2 - 1.5 * 0.4, 1e-12);
    EXPECT_NEAR(b.rev_term, -0.6, 1e-12);
    const LossBreakdown f = combine_losses(0.3, 0.8, 1.2, 0.4, w, true, -0.5);
    EXPECT_NEAR(f.rev_term, -0.5, 1e-12);
    EXPECT_NEAR(f.total, 3.0 + 4.0 + 2.4 - 0.5, 1e-12);
    EXPECT_THROW(combine_losses(0, 0, 0, 0, LossWeights{-1, 0, 0, 0, 0}), std::invalid_argument);
}

TEST(RecLoss, IsTheL1Distance) {
    const Tensor x({1, 1, 1, 3}, {0.1, -0.2, 0.3}), y({1, 1, 1, 3}, {0.0, 0.2, 0.3});
    EXPECT_NEAR(rec_loss(x, y), 0.5, 1e-12);
    NoGradGuard ng;
    EXPECT_NEAR(rec_loss(Var(x), Var(y), Reduction::Mean).value()[0], 0.5 / 3, 1e-12);
    EXPECT_THROW(rec_loss(x, Tensor({3})), std::invalid_argument);
}

class ObjectiveTest : public ::testing::Test {
protected:
    ObjectiveTest() : phi(make_phi()) {
        Rng rng(3);
        data.images = random_tensor({8, 3, 16, 16}, rng);
        for (int i = 0; i < 8; ++i) data.labels.push_back(i % 4), data.names.push_back("s" + std::to_string(i));
        cfg.alpha = 0.1;
        cfg.batch_size = 3;
        cfg.reduction = Reduction::Sum;
        cfg.aux = AuxWeights{0.7, 0.5, 0.3, 0.2};
    }
    static ToyEmbedder make_phi() {
        Rng rng(9);
        return ToyEmbedder(16, 4, 6, rng);
    }
    Batch batch(std::uint64_t seed) {
        Rng rng(seed);
        return make_batch(data, {0, 3, 5}, arch, cfg, rng);
    }

    ArchConfig arch = tiny_arch();
    TrainConfig cfg;
    ToyEmbedder phi;
    Dataset data;
};

TEST_F(ObjectiveTest, TotalLossPartsMatchIndependentRecomputation) {
    TrainState s(arch, cfg);
    const Batch b = batch(1);
    Var x(b.x);
    Var e = batch_condition(s.model.protector.enc, b.keys, b.nonces, true);
    Var z = protect_batch(x, e, cfg.alpha, s.model.protector.gen);
    Var xh = s.model.recoverer.rec(z, e);
    Var dec = s.model.recoverer.dec(z);
    Var xt = s.model.adversary(z);
    const TotalLoss tl = total_loss(x, z, xh, dec, Var(signal_batch(b.nonces)), xt, cfg.weights, phi, Reduction::Sum);

    double rec = 0, id = 0, mse = 0, rev = 0;
    for (int n = 0; n < b.size(); ++n) {
        const Tensor xn = first_image(b.x.sample(n)), zn = first_image(z.value().sample(n));
        rec += rec_loss(xn, first_image(xh.value().sample(n)));
        id += id_loss(xn, zn, phi);
        std::vector<double> d(dec.value().vec().begin() + n * arch.nonce_bits,
                              dec.value().vec().begin() + (n + 1) * arch.nonce_bits);
        mse += nonce_loss(d, Nonce{b.nonces[static_cast<std::size_t>(n)]});
        rev += rev_loss(xn, first_image(xt.value().sample(n)), cfg.weights.l2);
    }
    EXPECT_NEAR(tl.parts.rec, rec, 1e-9);
    EXPECT_NEAR(tl.parts.id, id, 1e-9);
    EXPECT_NEAR(tl.parts.mse, mse, 1e-9);
    EXPECT_NEAR(tl.parts.rev, rev, 1e-9);
    const LossWeights& w = cfg.weights;
    EXPECT_NEAR(tl.parts.total, w.rec * rec + w.id * id + w.mse * mse - w.rev * rev, 1e-9);
    EXPECT_NEAR(tl.total.value()[0], tl.parts.total, 1e-9);
}

TEST_F(ObjectiveTest, ProtectorLossTotalIncludesAuxTerms) {
    TrainState s(arch, cfg);
    const TotalLoss tl = protector_loss(batch(2), s, cfg, phi);
    const LossBreakdown& p = tl.parts;
    EXPECT_GT(p.aux, 0.0);
    EXPECT_NEAR(p.total, p.rec * 10 + p.id * 5 + p.mse * 1 + p.rev_term + p.aux, 1e-9);
    EXPECT_NEAR(tl.total.value()[0], p.total, 1e-9);
}

TEST_F(ObjectiveTest, AdversaryStepLeavesProtectorUntouched) {
    TrainState s(arch, cfg);
    const std::uint64_t p0 = s.model.protector_hash(), a0 = s.model.adversary_hash();
    adversary_step(batch(3), s, cfg);
    EXPECT_EQ(s.model.protector_hash(), p0);
    EXPECT_NE(s.model.adversary_hash(), a0);
}

TEST_F(ObjectiveTest, ProtectorStepLeavesAdversaryUntouched) {
    TrainState s(arch, cfg);
    adversary_step(batch(4), s, cfg);  // make A non-trivial first
    const std::uint64_t p0 = s.model.protector_hash(), a0 = s.model.adversary_hash();
    protector_step(batch(5), s, cfg, phi);
    EXPECT_EQ(s.model.adversary_hash(), a0);
    EXPECT_NE(s.model.protector_hash(), p0);
}

TEST_F(ObjectiveTest, ZeroRevWeightDecouplesProtectorFromAdversary) {
    cfg.weights.rev = 0.0;
    TrainState s1(arch, cfg), s2(arch, cfg);
    Rng rng(77);
    for (std::size_t i = 0; i < s2.model.adversary.params.size(); ++i) {
        Tensor& v = s2.model.adversary.params.var(i).mutable_value();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = rng.normal(0, 0.5);
    }
    const Batch b = batch(6);
    EXPECT_EQ(protector_loss(b, s1, cfg, phi).total.value()[0], protector_loss(b, s2, cfg, phi).total.value()[0]);
    protector_step(b, s1, cfg, phi);
    protector_step(b, s2, cfg, phi);
    EXPECT_EQ(s1.model.protector_hash(), s2.model.protector_hash());
}

TEST_F(ObjectiveTest, RevFloorClampsTheAdversarialTerm) {
    cfg.rev_floor_enabled = true;
    cfg.rev_floor = -1e-6;
    TrainState s(arch, cfg);
    adversary_step(batch(7), s, cfg);
    const TotalLoss tl = protector_loss(batch(8), s, cfg, phi);
    EXPECT_NEAR(tl.parts.rev_term, -1e-6, 1e-15);
}

TEST_F(ObjectiveTest, RevLossGradientMatchesFiniteDifferences) {
    cfg.reduction = Reduction::Mean;
    TrainState s(arch, cfg);
    // Move A away from the identity initialization so every layer gets gradient.
    Rng rng(10);
    for (std::size_t i = 0; i < s.model.adversary.params.size(); ++i) {
        Tensor& v = s.model.adversary.params.var(i).mutable_value();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += rng.normal(0, 0.05);
    }
    const Batch b = batch(11);
    ParamSet& ps = s.model.adversary.params;
    ASSERT_LE(ps.scalar_count(), 5000u);
    ps.zero_grad();
    backward(adversary_loss(b, s, cfg));
    const auto r = arfp::test::finite_difference({&ps}, [&] {
        NoGradGuard ng;
        return adversary_loss(b, s, cfg).value()[0];
    });
    EXPECT_LT(r.rel_error, 1e-4) << r.checked << " parameters";
}

namespace {

// Perturbs R, A and G away from their zero-initialized heads so every layer carries gradient.
void randomize_heads(ArfpModel& m, std::uint64_t seed) {
    Rng rng(seed);
    for (ParamSet* ps : {&m.recoverer.rec.params, &m.adversary.params, &m.protector.gen.params})
        for (std::size_t i = 0; i < ps->size(); ++i) {
            Tensor& v = ps->var(i).mutable_value();
            for (std::size_t k = 0; k < v.size(); ++k) v[k] += rng.normal(0, 0.05);
        }
}

}  // namespace

// The full objective is checked in two parts so each network stays under 5000 parameters.
TEST_F(ObjectiveTest, TotalLossGradientWrtProtectorMatchesFiniteDifferences) {
    arch.embed_dim = 4;
    TrainState s(arch, cfg);
    randomize_heads(s.model, 12);
    const Batch b = batch(13);
    auto& m = s.model;
    std::vector<ParamSet*> sets{&m.protector.enc.params, &m.protector.gen.params};
    std::size_t n = 0;
    for (ParamSet* ps : sets) n += ps->scalar_count();
    ASSERT_LE(n, 5000u);
    for (ParamSet* ps : {&m.protector.enc.params, &m.protector.gen.params, &m.recoverer.rec.params,
                         &m.recoverer.dec.params, &m.adversary.params})
        ps->zero_grad();
    backward(protector_loss(b, s, cfg, phi).total);
    const auto r = arfp::test::finite_difference(sets, [&] {
        NoGradGuard ng;
        return protector_loss(b, s, cfg, phi).total.value()[0];
    });
    EXPECT_LT(r.rel_error, 1e-4) << r.checked << " parameters";
}

TEST_F(ObjectiveTest, TotalLossGradientWrtRecoveryMatchesFiniteDifferences) {
    arch.embed_dim = 4;
    TrainState s(arch, cfg);
    randomize_heads(s.model, 14);
    const Batch b = batch(15);
    auto& m = s.model;
    std::vector<ParamSet*> sets{&m.recoverer.rec.params, &m.recoverer.dec.params};
    std::size_t n = 0;
    for (ParamSet* ps : sets) n += ps->scalar_count();
    ASSERT_LE(n, 5000u);
    for (ParamSet* ps : {&m.protector.enc.params, &m.protector.gen.params, &m.recoverer.rec.params,
                         &m.recoverer.dec.params, &m.adversary.params})
        ps->zero_grad();
    backward(protector_loss(b, s, cfg, phi).total);
    const auto r = arfp::test::finite_difference(sets, [&] {
        NoGradGuard ng;
        return protector_loss(b, s, cfg, phi).total.value()[0];
    });
    EXPECT_LT(r.rel_error, 1e-4) << r.checked << " parameters";
}

TEST_F(ObjectiveTest, TrainingIsDeterministicAndRecordsHistory) {
    cfg.cycles = 2;
    cfg.rounds_per_cycle = 2;
    TrainState a(arch, cfg), b(arch, cfg);
    train(a, data, cfg, phi);
    train(b, data, cfg, phi);
    EXPECT_EQ(a.hash(), b.hash());
    ASSERT_EQ(a.history.size(), 2u);
    EXPECT_EQ(a.steps, 8);
    const std::string csv = history_csv(a.history);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "cycle,L_rec,L_id,L_MSE,L_REV,total");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST_F(ObjectiveTest, TrainStateRoundTripsThroughCheckpoint) {
    cfg.cycles = 1;
    TrainState a(arch, cfg);
    train(a, data, cfg, phi);
    const std::string path = (std::filesystem::temp_directory_path() / "arfp_state_test.ckpt").string();
    save_train_state(path, a);
    TrainState b(arch, cfg);
    load_train_state(path, b);
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(b.history.size(), 1u);
    // Continuing from the loaded state matches continuing the original.
    train(a, data, cfg, phi);
    train(b, data, cfg, phi);
    EXPECT_EQ(a.hash(), b.hash());
    std::filesystem::remove(path);
}

TEST_F(ObjectiveTest, MakeBatchUsesIdentityKeysAndOneBitWrongKeys) {
    const Batch b = batch(14);
    ASSERT_EQ(b.size(), 3);
    for (int n = 0; n < 3; ++n) {
        const auto i = static_cast<std::size_t>(n);
        EXPECT_EQ(b.keys[i], identity_key(cfg.key_seed, b.labels[i], arch.key_bits).bits);
        EXPECT_EQ(hamming(b.keys[i], b.wrong_keys[i]), 1);
        EXPECT_NE(b.splice_donor[i], n);
    }
    EXPECT_THROW(make_batch(data, {}, arch, cfg, *std::make_unique<Rng>(1)), std::invalid_argument);
}

TEST(TrainConfig, ValidationRejectsBadValues) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.lr = 0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.rev_floor_enabled = true;
    c.rev_floor = 0.5;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = TrainConfig{};
    c.aux.splice = -1;
    EXPECT_THROW(c.validate(), std::invalid_argument);
}
