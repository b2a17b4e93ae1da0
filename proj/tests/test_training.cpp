#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "votetok/experiment.hpp"
#include "votetok/trainer.hpp"

using namespace votetok;
using nn::Array;
using nn::Tape;
using nn::Var;

namespace {

// Small deterministic setup shared by the training tests.
struct TinySetup {
    FeatureConfig fcfg;
    CorpusSpec spec;
    ModelConfig mcfg;
    std::vector<Utterance> corpus;

    explicit TinySetup(int n_branches = 3, int code_dim = 4, int n_utts = 4) {
        fcfg.frame_len_samples = 128;
        fcfg.hop_samples = 64;
        fcfg.n_bands = 6;
        spec.n_utterances = n_utts;
        spec.alphabet_size = 4;
        spec.segment_frames = 4;
        spec.symbols_per_utterance = 3;
        spec.seed = 2024;
        mcfg.feature_dim = fcfg.n_bands;
        mcfg.encoder_hidden = 10;
        mcfg.hidden_dim = 8;
        mcfg.pool_factor = 2;
        mcfg.quantizer.n_branches = n_branches;
        mcfg.quantizer.code_dim = code_dim;
        mcfg.quantizer.hidden_dim = 8;
        mcfg.n_classes = 4;
        corpus = synth_corpus(spec, fcfg);
    }
};

std::vector<const Utterance*> ptrs(const std::vector<Utterance>& corpus, size_t count) {
    std::vector<const Utterance*> out;
    for (size_t i = 0; i < count && i < corpus.size(); ++i) out.push_back(&corpus[i]);
    return out;
}

void assign_params(Model& model, const std::vector<Array>& values) {
    size_t i = 0;
    model.for_each_param([&](const std::string&, Array& a) { a = values[i++]; });
}

std::vector<Array> collect_params(const Model& model) {
    std::vector<Array> out;
    model.for_each_param([&](const std::string&, const Array& a) { out.push_back(a); });
    return out;
}

}  // namespace

TEST_CASE("consensus loss closed forms") {
    Tape tape;
    SUBCASE("identical branches give zero") {
        const Var p = tape.leaf(Array({2, 3}, {1, 2, 3, 4, 5, 6}), true);
        CHECK(tape.value(consensus_loss(tape, {p, p, p})).item() == doctest::Approx(0.0));
    }
    SUBCASE("n=3, d=1, p=(2,0,1) gives 2/3") {
        const Var a = tape.leaf(Array({1, 1}, {2.0}), true);
        const Var b = tape.leaf(Array({1, 1}, {0.0}), true);
        const Var c = tape.leaf(Array({1, 1}, {1.0}), true);
        CHECK(tape.value(consensus_loss(tape, {a, b, c})).item() ==
              doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("scaling all branches by c scales the loss by c^2") {
        const Var a = tape.leaf(Array({1, 2}, {2.0, -1.0}), true);
        const Var b = tape.leaf(Array({1, 2}, {0.5, 1.5}), true);
        const double base = tape.value(consensus_loss(tape, {a, b, a})).item();
        const Var a3 = tape.scale(a, 3.0);
        const Var b3 = tape.scale(b, 3.0);
        CHECK(tape.value(consensus_loss(tape, {a3, b3, a3})).item() ==
              doctest::Approx(9.0 * base).epsilon(1e-12));
    }
    SUBCASE("needs two branches") {
        const Var a = tape.leaf(Array({1, 1}, {1.0}), true);
        CHECK_THROWS_AS(consensus_loss(tape, {a}), std::invalid_argument);
    }
}

TEST_CASE("consensus gradient is identical with and without a frozen mean") {
    // Deviations sum to zero, so differentiating through the mean adds
    // nothing; the ablation flag must not change gradients.
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        Array a = Array::zeros({2, 3}), b = Array::zeros({2, 3}), c = Array::zeros({2, 3});
        for (auto* arr : {&a, &b, &c})
            for (auto& e : arr->v) e = rng.normal();

        Tape t1;
        const Var a1 = t1.leaf(a, true), b1 = t1.leaf(b, true), c1 = t1.leaf(c, true);
        t1.backward(consensus_loss(t1, {a1, b1, c1}, false));
        Tape t2;
        const Var a2 = t2.leaf(a, true), b2 = t2.leaf(b, true), c2 = t2.leaf(c, true);
        t2.backward(consensus_loss(t2, {a2, b2, c2}, true));
        for (size_t i = 0; i < a.v.size(); ++i) {
            CHECK(t1.grad(a1).v[i] == doctest::Approx(t2.grad(a2).v[i]).epsilon(1e-12));
            CHECK(t1.grad(b1).v[i] == doctest::Approx(t2.grad(b2).v[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("consensus anchor: descent moves every branch toward the mean") {
    TinySetup setup(5, 4);
    Model model = Model::init(setup.mcfg, 77);

    // Frozen model, one utterance, strong perturbation on two branches.
    const Waveform& clean = setup.corpus[0].waveform;
    Rng prng(3);
    const auto [noisy, applied] = perturb(
        clean, {PerturbationSpec::fixed(PerturbationKind::kGaussian, 5.0)}, prng, {});
    (void)applied;
    const auto pooled_clean = model.encode_pooled(extract_features(clean, setup.fcfg));
    const auto pooled_noisy = model.encode_pooled(extract_features(noisy, setup.fcfg));

    const int t = static_cast<int>(pooled_clean.size()), d = 4, n = 5;
    Tape tape;
    std::vector<Var> pre;
    for (int i = 0; i < n; ++i) {
        Array p = Array::zeros({t, d});
        const auto& src = i < 2 ? pooled_noisy : pooled_clean;
        for (int r = 0; r < t; ++r) {
            const auto row = project_one(model.bank, i, src[r]);
            for (int j = 0; j < d; ++j) p.v[r * d + j] = row[j];
        }
        pre.push_back(tape.leaf(p, true));
    }
    tape.backward(consensus_loss(tape, pre));

    // Mean over branches per frame.
    std::vector<double> mean(static_cast<size_t>(t) * d, 0.0);
    for (const Var p : pre)
        for (size_t i = 0; i < mean.size(); ++i) mean[i] += tape.value(p).v[i] / n;

    for (const Var p : pre) {
        for (int r = 0; r < t; ++r) {
            double dot = 0.0, dev_norm = 0.0;
            for (int j = 0; j < d; ++j) {
                const double dev = tape.value(p).v[r * d + j] - mean[r * d + j];
                dot += tape.grad(p).v[r * d + j] * dev;
                dev_norm += dev * dev;
            }
            if (dev_norm > 1e-18) CHECK(dot > 0.0);  // -grad points toward the mean
        }
    }
}

TEST_CASE("commitment loss closed forms") {
    Tape tape;
    SUBCASE("already binary means zero") {
        const Var p = tape.leaf(Array({1, 4}, {1.0, -1.0, 1.0, -1.0}), true);
        CHECK(tape.value(commitment_loss(tape, {p})).item() == doctest::Approx(0.0));
    }
    SUBCASE("p=(0.5,-2) gives 0.625") {
        const Var p = tape.leaf(Array({1, 2}, {0.5, -2.0}), true);
        CHECK(tape.value(commitment_loss(tape, {p})).item() ==
              doctest::Approx(0.625).epsilon(1e-12));
    }
    SUBCASE("gradient equals 2(p - B)/count") {
        const Array base({1, 2}, {0.5, -2.0});
        Tape t;
        const Var p = t.leaf(base, true);
        t.backward(commitment_loss(t, {p}));
        CHECK(t.grad(p).v[0] == doctest::Approx(2.0 * (0.5 - 1.0) / 2.0));
        CHECK(t.grad(p).v[1] == doctest::Approx(2.0 * (-2.0 + 1.0) / 2.0));

        const auto f = [](const std::vector<Array>& params) {
            // Frozen targets from the base point, as stop-gradient implies.
            double acc = 0.0;
            const double targets[2] = {1.0, -1.0};
            for (size_t i = 0; i < 2; ++i) {
                const double diff = params[0].v[i] - targets[i];
                acc += diff * diff;
            }
            return acc / 2.0;
        };
        const auto res = nn::grad_check(f, {base}, {t.grad(p)});
        CHECK(res.max_rel_error < 1e-8);
    }
}

TEST_CASE("route_branches honors the minority rule") {
    SUBCASE("n=3 always perturbs exactly one branch") {
        Rng rng(5);
        for (int trial = 0; trial < 200; ++trial) {
            const auto routes = route_branches(3, rng);
            int count = 0;
            for (bool r : routes) count += r;
            CHECK(count == 1);
        }
    }
    SUBCASE("n=1 never perturbs") {
        Rng rng(6);
        const auto routes = route_branches(1, rng);
        CHECK(routes == std::vector<bool>{false});
    }
    SUBCASE("n=5 per-branch frequency is E[k]/n = 0.3") {
        Rng rng(7);
        std::vector<int> counts(5, 0);
        const int trials = 10000;
        for (int trial = 0; trial < trials; ++trial) {
            const auto routes = route_branches(5, rng);
            int k = 0;
            for (int i = 0; i < 5; ++i) {
                counts[i] += routes[i];
                k += routes[i];
            }
            CHECK(k >= 1);
            CHECK(k <= 2);  // strictly fewer than n/2
        }
        for (int i = 0; i < 5; ++i)
            CHECK(std::abs(static_cast<double>(counts[i]) / trials - 0.3) < 0.02);
    }
    SUBCASE("even n rejected") {
        Rng rng(8);
        CHECK_THROWS_AS(route_branches(4, rng), std::invalid_argument);
    }
}

TEST_CASE("loss breakdown satisfies the weighted-sum identity") {
    TinySetup setup;
    Model model = Model::init(setup.mcfg, 11);
    nn::AdamW opt({});
    Rng route_rng(1), noise_rng(2);
    NoiseAwareConfig noise;
    noise.specs = default_training_specs("");
    LossWeights weights;
    const LossBreakdown bd = train_step(model, ptrs(setup.corpus, 3), setup.fcfg, noise, weights,
                                        opt, 1.0, route_rng, noise_rng, {});
    const double recomputed =
        bd.task + weights.consensus * bd.consensus + weights.commitment * bd.commitment +
        weights.codebook_entropy * bd.codebook;
    CHECK(std::abs(bd.total - recomputed) < 1e-12);
    CHECK(bd.consensus > 0.0);
    CHECK(bd.commitment > 0.0);
}

TEST_CASE("zero weights and negligible perturbation reduce to plain CE") {
    TinySetup setup;
    LossWeights zero;
    zero.consensus = zero.commitment = zero.codebook_entropy = 0.0;

    Model m1 = Model::init(setup.mcfg, 21);
    Model m2 = Model::init(setup.mcfg, 21);
    nn::AdamW o1({}), o2({});
    Rng rr1(3), nr1(4), rr2(3), nr2(4);

    NoiseAwareConfig near_identity;
    near_identity.specs = {PerturbationSpec::fixed(PerturbationKind::kGaussian, 300.0)};
    NoiseAwareConfig off;
    off.enabled = false;

    const LossBreakdown with_noise = train_step(m1, ptrs(setup.corpus, 2), setup.fcfg,
                                                near_identity, zero, o1, 1.0, rr1, nr1, {});
    const LossBreakdown without = train_step(m2, ptrs(setup.corpus, 2), setup.fcfg, off, zero, o2,
                                             1.0, rr2, nr2, {});
    CHECK(with_noise.total == doctest::Approx(with_noise.task));
    CHECK(with_noise.task == doctest::Approx(without.task).epsilon(1e-9));
}

TEST_CASE("composite loss gradients match finite differences on the surrogate graph") {
    TinySetup setup(3, 4);
    setup.mcfg.hidden_dim = 8;
    setup.mcfg.quantizer.hidden_dim = 8;
    Model model = Model::init(setup.mcfg, 31);

    // One fixed perturbation draw, reused by every loss evaluation.
    Rng prng(9);
    const auto [noisy, applied] = perturb(
        setup.corpus[0].waveform, {PerturbationSpec::fixed(PerturbationKind::kGaussian, 15.0)},
        prng, {});
    (void)applied;
    const FeatureMatrix clean_f = extract_features(setup.corpus[0].waveform, setup.fcfg);
    const FeatureMatrix noisy_f = extract_features(noisy, setup.fcfg);
    const std::vector<std::vector<bool>> routes = {{true, false, false}};
    const LossWeights weights;
    TrainGraphOptions opts;
    opts.identity_surrogate = true;

    const auto build = [&](const Model& m, Tape& tape) {
        return build_batch_graph(tape, m, {&clean_f}, {&noisy_f}, {&setup.corpus[0].labels},
                                 routes, weights, opts);
    };

    Tape tape;
    const BatchGraph g = build(model, tape);
    tape.backward(g.total);
    std::vector<Array> analytic;
    for (const Var p : g.params) analytic.push_back(tape.grad(p));

    const std::vector<Array> base = collect_params(model);
    Model probe = model;
    const auto f = [&](const std::vector<Array>& values) {
        assign_params(probe, values);
        Tape t;
        return build(probe, t).breakdown.total;
    };
    const auto res = nn::grad_check(f, base, analytic, 1e-4);
    INFO("param ", res.param, " coord ", res.coord, " analytic ", res.analytic, " numeric ",
         res.numeric);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("fixed-seed train_step reproduces itself exactly") {
    TinySetup setup;
    NoiseAwareConfig noise;
    noise.specs = default_training_specs("");
    const LossWeights weights;

    const auto run = [&]() {
        Model model = Model::init(setup.mcfg, 41);
        nn::AdamW opt({});
        Rng route_rng(11), noise_rng(12);
        const LossBreakdown bd = train_step(model, ptrs(setup.corpus, 3), setup.fcfg, noise,
                                            weights, opt, 1.0, route_rng, noise_rng, {});
        return std::make_pair(bd, collect_params(model));
    };
    const auto [bd1, params1] = run();
    const auto [bd2, params2] = run();
    CHECK(bd1.total == bd2.total);
    CHECK(bd1.task == bd2.task);
    CHECK(bd1.consensus == bd2.consensus);
    CHECK(bd1.commitment == bd2.commitment);
    CHECK(bd1.codebook == bd2.codebook);
    for (size_t i = 0; i < params1.size(); ++i) CHECK(params1[i].v == params2[i].v);
}

TEST_CASE("golden run: frozen loss breakdown for a fixed tiny step") {
    TinySetup setup;
    Model model = Model::init(setup.mcfg, 41);
    nn::AdamW opt({});
    Rng route_rng(11), noise_rng(12);
    NoiseAwareConfig noise;
    noise.specs = default_training_specs("");
    const LossBreakdown bd = train_step(model, ptrs(setup.corpus, 3), setup.fcfg, noise, {}, opt,
                                        1.0, route_rng, noise_rng, {});
    // Values recorded from the first verified run of this configuration.
    CHECK(bd.task == 1.4175645630082276);
    CHECK(bd.consensus == 0.013893441370986104);
    CHECK(bd.commitment == 0.91875962934650979);
    CHECK(bd.codebook == -0.0018224302514956436);
    CHECK(bd.total == 1.6489054004361061);
}

TEST_CASE("training is deterministic and 0 epochs is a no-op") {
    TinySetup setup(3, 4, 12);
    NoiseAwareConfig noise;
    noise.specs = default_training_specs("");
    TrainOptions opts;
    opts.epochs = 2;
    opts.batch_size = 4;
    opts.warmup_steps = 2;
    opts.val_fraction = 0.25;
    opts.seed = 51;

    Model m1 = Model::init(setup.mcfg, 51);
    Model m2 = Model::init(setup.mcfg, 51);
    const TrainResult r1 = train(m1, setup.corpus, setup.fcfg, opts, noise, {}, {});
    const TrainResult r2 = train(m2, setup.corpus, setup.fcfg, opts, noise, {}, {});
    REQUIRE(r1.history.size() == 2);
    for (size_t e = 0; e < r1.history.size(); ++e) {
        CHECK(r1.history[e].mean_loss.total == r2.history[e].mean_loss.total);
        CHECK(r1.history[e].val_frame_accuracy == r2.history[e].val_frame_accuracy);
    }
    const auto p1 = collect_params(m1), p2 = collect_params(m2);
    for (size_t i = 0; i < p1.size(); ++i) CHECK(p1[i].v == p2[i].v);

    Model frozen = Model::init(setup.mcfg, 52);
    const auto before = collect_params(frozen);
    TrainOptions none = opts;
    none.epochs = 0;
    const TrainResult r0 = train(frozen, setup.corpus, setup.fcfg, none, noise, {}, {});
    CHECK(r0.history.empty());
    const auto after = collect_params(frozen);
    for (size_t i = 0; i < before.size(); ++i) CHECK(before[i].v == after[i].v);
}

TEST_CASE("tied branches reproduce the single-branch tokenizer") {
    TinySetup setup5(5, 4);
    TinySetup setup1(1, 4);
    Model m5 = Model::init(setup5.mcfg, 61);
    const Model m1 = Model::init(setup1.mcfg, 61);  // same seed: shared encoder and branch 0

    for (int i = 1; i < 5; ++i) {
        m5.bank.w[i] = m5.bank.w[0];
        m5.bank.b[i] = m5.bank.b[0];
    }
    for (const auto& utt : setup5.corpus) {
        CHECK(m5.tokenize(utt.waveform, setup5.fcfg) == m1.tokenize(utt.waveform, setup1.fcfg));
    }
}

TEST_CASE("tokenize output is stable, in range, and pooled correctly") {
    TinySetup setup;
    const Model model = Model::init(setup.mcfg, 71);
    const auto& utt = setup.corpus[0];
    const auto tokens = model.tokenize(utt.waveform, setup.fcfg);
    const auto again = model.tokenize(utt.waveform, setup.fcfg);
    CHECK(tokens == again);
    const int frames = static_cast<int>(utt.labels.size());
    CHECK(tokens.size() == static_cast<size_t>((frames + 1) / 2));  // pool_factor 2, right-pad
    for (const TokenId t : tokens) CHECK(t < (1u << 4));

    CHECK(pool_labels({0, 0, 1, 1, 2}, 2) == std::vector<int>{0, 1, 2});
}

TEST_CASE("history csv is written with all loss terms") {
    TinySetup setup(3, 4, 8);
    Model model = Model::init(setup.mcfg, 81);
    TrainOptions opts;
    opts.epochs = 1;
    opts.batch_size = 4;
    opts.seed = 81;
    NoiseAwareConfig noise;
    noise.enabled = false;
    const TrainResult result = train(model, setup.corpus, setup.fcfg, opts, noise, {}, {});
    const std::string path = "/tmp/votetok_test_history.csv";
    write_history_csv(result.history, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "epoch,task,consensus,commitment,codebook,total,val_frame_accuracy");
    std::string row;
    CHECK(std::getline(in, row));
    std::remove(path.c_str());
}
