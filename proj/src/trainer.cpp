#include "votetok/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace votetok {

void LossWeights::validate() const {
    if (consensus < 0.0 || commitment < 0.0 || codebook_entropy < 0.0)
        throw std::invalid_argument("LossWeights: weights must be >= 0");
}

std::vector<bool> route_branches(int n, Rng& rng) {
    if (n <= 0 || n % 2 == 0) throw std::invalid_argument("route_branches: n must be odd and positive");
    std::vector<bool> perturbed(n, false);
    const int k_max = (n - 1) / 2;
    if (k_max == 0) return perturbed;  // n == 1: nothing to route

    const int k = static_cast<int>(rng.uniform_int(1, k_max));
    // Partial Fisher-Yates: the first k entries of a shuffled index list.
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
        const int j = static_cast<int>(rng.uniform_int(i, n - 1));
        std::swap(idx[i], idx[j]);
        perturbed[idx[i]] = true;
    }
    return perturbed;
}

nn::Var consensus_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant, bool stop_grad_mean) {
    const int n = static_cast<int>(pre_quant.size());
    if (n < 2) throw std::invalid_argument("consensus_loss: need at least 2 branches");
    const int t = tape.value(pre_quant[0]).rows();

    nn::Var mean = tape.mean_over(pre_quant);
    if (stop_grad_mean) mean = tape.stop_gradient(mean);

    nn::Var acc{-1};
    for (nn::Var p : pre_quant) {
        const nn::Var dev = tape.sub(p, mean);
        const nn::Var term = tape.sum_all(tape.mul(dev, dev));
        acc = acc.id < 0 ? term : tape.add(acc, term);
    }
    return tape.scale(acc, 1.0 / (static_cast<double>(t) * n));
}

nn::Var commitment_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant) {
    if (pre_quant.empty()) throw std::invalid_argument("commitment_loss: no branches");
    nn::Var acc{-1};
    for (nn::Var p : pre_quant) {
        // The target is the branch's own code, held constant; sign is
        // locally flat so this matches a frozen-target finite difference.
        nn::Array target = tape.value(p);
        for (auto& e : target.v) e = e >= 0.0 ? 1.0 : -1.0;
        const nn::Var term = tape.mse(p, tape.leaf(std::move(target), false));
        acc = acc.id < 0 ? term : tape.add(acc, term);
    }
    return tape.scale(acc, 1.0 / static_cast<double>(pre_quant.size()));
}

nn::Var codebook_entropy_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant) {
    return tape.entropy_loss(pre_quant);
}

namespace {

struct ParamVars {
    std::vector<nn::Var> ordered;
    std::vector<std::string> names;
};

ParamVars make_param_leaves(nn::Tape& tape, const Model& model) {
    ParamVars pv;
    model.for_each_param([&](const std::string& name, const nn::Array& a) {
        pv.ordered.push_back(tape.leaf(a, true));
        pv.names.push_back(name);
    });
    return pv;
}

// Leaf order must match Model::for_each_param.
struct ParamView {
    nn::Var enc_w1, enc_b1, enc_w2, enc_b2;
    std::vector<nn::Var> bw, bb;
    nn::Var head_w, head_b;
};

ParamView view_params(const ParamVars& pv, int n_branches) {
    ParamView v;
    v.enc_w1 = pv.ordered[0];
    v.enc_b1 = pv.ordered[1];
    v.enc_w2 = pv.ordered[2];
    v.enc_b2 = pv.ordered[3];
    for (int i = 0; i < n_branches; ++i) {
        v.bw.push_back(pv.ordered[4 + 2 * i]);
        v.bb.push_back(pv.ordered[5 + 2 * i]);
    }
    v.head_w = pv.ordered[4 + 2 * n_branches];
    v.head_b = pv.ordered[5 + 2 * n_branches];
    return v;
}

nn::Var encode(nn::Tape& tape, const ParamView& pv, nn::Var feats, int pool_factor) {
    const nn::Var h1 = tape.relu(tape.affine(feats, pv.enc_w1, pv.enc_b1));
    const nn::Var h2 = tape.relu(tape.affine(h1, pv.enc_w2, pv.enc_b2));
    return tape.avg_pool_time(h2, pool_factor);
}

}  // namespace

BatchGraph build_batch_graph(nn::Tape& tape, const Model& model,
                             const std::vector<const FeatureMatrix*>& clean_feats,
                             const std::vector<const FeatureMatrix*>& perturbed_feats,
                             const std::vector<const std::vector<int>*>& labels,
                             const std::vector<std::vector<bool>>& routes,
                             const LossWeights& weights, const TrainGraphOptions& opts) {
    const size_t batch = clean_feats.size();
    if (batch == 0) throw std::invalid_argument("build_batch_graph: empty batch");
    if (perturbed_feats.size() != batch || labels.size() != batch || routes.size() != batch)
        throw std::invalid_argument("build_batch_graph: batch size mismatch");
    weights.validate();

    const int n = model.cfg.quantizer.n_branches;
    ParamVars pv = make_param_leaves(tape, model);
    const ParamView view = view_params(pv, n);

    nn::Var task_acc{-1}, cons_acc{-1}, commit_acc{-1};
    std::vector<nn::Var> all_pre_quant;

    for (size_t u = 0; u < batch; ++u) {
        const nn::Var x_clean = tape.leaf(model_input(*clean_feats[u]), false);
        const nn::Var pooled_clean = encode(tape, view, x_clean, model.cfg.pool_factor);

        nn::Var pooled_pert{-1};
        bool any_perturbed = false;
        for (bool r : routes[u]) any_perturbed = any_perturbed || r;
        if (any_perturbed) {
            if (!perturbed_feats[u])
                throw std::invalid_argument("build_batch_graph: route wants perturbed features but none given");
            const nn::Var x_pert = tape.leaf(model_input(*perturbed_feats[u]), false);
            pooled_pert = encode(tape, view, x_pert, model.cfg.pool_factor);
        }

        std::vector<nn::Var> inputs(n);
        for (int i = 0; i < n; ++i)
            inputs[i] = (i < static_cast<int>(routes[u].size()) && routes[u][i]) ? pooled_pert : pooled_clean;

        const std::vector<nn::Var> pre_quant = project(tape, inputs, view.bw, view.bb);
        std::vector<nn::Var> codes(n);
        for (int i = 0; i < n; ++i)
            codes[i] = opts.identity_surrogate ? pre_quant[i]
                                               : binarize(tape, pre_quant[i], model.cfg.quantizer.ste_clip);
        const nn::Var score = aggregate_train(tape, codes);

        const nn::Var logits = tape.affine(score, view.head_w, view.head_b);
        const auto pooled = pool_labels(*labels[u], model.cfg.pool_factor);
        const nn::Var task = tape.softmax_xent(logits, pooled);
        task_acc = task_acc.id < 0 ? task : tape.add(task_acc, task);

        if (n >= 2) {
            const nn::Var cons = consensus_loss(tape, pre_quant, opts.stop_grad_consensus_mean);
            cons_acc = cons_acc.id < 0 ? cons : tape.add(cons_acc, cons);
        }
        const nn::Var commit = commitment_loss(tape, pre_quant);
        commit_acc = commit_acc.id < 0 ? commit : tape.add(commit_acc, commit);

        for (nn::Var p : pre_quant) all_pre_quant.push_back(p);
    }

    const double inv_b = 1.0 / static_cast<double>(batch);
    const nn::Var task = tape.scale(task_acc, inv_b);
    const nn::Var cons =
        cons_acc.id < 0 ? tape.leaf(nn::Array::scalar(0.0), false) : tape.scale(cons_acc, inv_b);
    const nn::Var commit = tape.scale(commit_acc, inv_b);
    const nn::Var entropy = codebook_entropy_loss(tape, all_pre_quant);

    nn::Var total = task;
    total = tape.add(total, tape.scale(cons, weights.consensus));
    total = tape.add(total, tape.scale(commit, weights.commitment));
    total = tape.add(total, tape.scale(entropy, weights.codebook_entropy));

    BatchGraph g;
    g.total = total;
    g.breakdown.task = tape.value(task).item();
    g.breakdown.consensus = tape.value(cons).item();
    g.breakdown.commitment = tape.value(commit).item();
    g.breakdown.codebook = tape.value(entropy).item();
    g.breakdown.total = tape.value(total).item();
    g.params = std::move(pv.ordered);
    g.param_names = std::move(pv.names);
    return g;
}

namespace {

LossBreakdown step_on_features(Model& model, const std::vector<const FeatureMatrix*>& clean_feats,
                               const std::vector<const Waveform*>& waveforms,
                               const std::vector<const std::vector<int>*>& labels,
                               const FeatureConfig& fcfg, const NoiseAwareConfig& noise,
                               const LossWeights& weights, nn::AdamW& opt, double lr_scale,
                               Rng& route_rng, Rng& noise_rng, const NoisePoolMap& pools,
                               const TrainGraphOptions& opts) {
    const size_t batch = clean_feats.size();
    const int n = model.cfg.quantizer.n_branches;
    const bool noise_active = noise.enabled && !noise.specs.empty() && n > 1;

    std::vector<FeatureMatrix> perturbed_store(batch);
    std::vector<const FeatureMatrix*> perturbed(batch, nullptr);
    std::vector<std::vector<bool>> routes(batch);
    for (size_t u = 0; u < batch; ++u) {
        if (noise_active) {
            auto [wp, applied] = perturb(*waveforms[u], noise.specs, noise_rng, pools);
            (void)applied;
            perturbed_store[u] = extract_features(wp, fcfg);
            perturbed[u] = &perturbed_store[u];
            routes[u] = route_branches(n, route_rng);
        } else {
            routes[u] = std::vector<bool>(n, false);
        }
    }

    nn::Tape tape;
    BatchGraph g = build_batch_graph(tape, model, clean_feats, perturbed, labels, routes, weights, opts);
    if (!std::isfinite(g.breakdown.total))
        throw std::runtime_error("train_step: non-finite loss " + std::to_string(g.breakdown.total));

    tape.backward(g.total);

    std::vector<std::pair<std::string, nn::Array*>> params;
    std::vector<const nn::Array*> grads;
    size_t i = 0;
    model.for_each_param([&](const std::string& name, nn::Array& a) {
        params.emplace_back(name, &a);
        grads.push_back(&tape.grad(g.params[i]));
        ++i;
    });
    opt.step(params, grads, lr_scale);
    return g.breakdown;
}

}  // namespace

LossBreakdown train_step(Model& model, const std::vector<const Utterance*>& batch,
                         const FeatureConfig& fcfg, const NoiseAwareConfig& noise,
                         const LossWeights& weights, nn::AdamW& opt, double lr_scale,
                         Rng& route_rng, Rng& noise_rng, const NoisePoolMap& pools,
                         const TrainGraphOptions& opts) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    std::vector<FeatureMatrix> feats_store;
    feats_store.reserve(batch.size());
    std::vector<const FeatureMatrix*> feats;
    std::vector<const Waveform*> waves;
    std::vector<const std::vector<int>*> labels;
    for (const Utterance* utt : batch) {
        feats_store.push_back(extract_features(utt->waveform, fcfg));
        waves.push_back(&utt->waveform);
        labels.push_back(&utt->labels);
    }
    for (const auto& f : feats_store) feats.push_back(&f);
    return step_on_features(model, feats, waves, labels, fcfg, noise, weights, opt, lr_scale,
                            route_rng, noise_rng, pools, opts);
}

double frame_accuracy(const Model& model, const std::vector<const Utterance*>& utts,
                      const FeatureConfig& fcfg) {
    int64_t correct = 0, total = 0;
    for (const Utterance* utt : utts) {
        const auto pred = model.predict_labels(extract_features(utt->waveform, fcfg));
        const auto gold = pool_labels(utt->labels, model.cfg.pool_factor);
        if (pred.size() != gold.size()) throw std::logic_error("frame_accuracy: frame count mismatch");
        for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == gold[i];
        total += static_cast<int64_t>(pred.size());
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult train(Model& model, const std::vector<Utterance>& corpus, const FeatureConfig& fcfg,
                  const TrainOptions& options, const NoiseAwareConfig& noise,
                  const LossWeights& weights, const NoisePoolMap& pools) {
    if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
    if (options.val_fraction < 0.0 || options.val_fraction >= 1.0)
        throw std::invalid_argument("train: val_fraction must be in [0, 1)");

    const int n_total = static_cast<int>(corpus.size());
    const int n_val = static_cast<int>(std::floor(options.val_fraction * n_total));
    const int n_train = n_total - n_val;
    if (n_train <= 0) throw std::invalid_argument("train: no training utterances after validation split");

    // Clean features never change; extract once.
    std::vector<FeatureMatrix> clean_feats(n_train);
    for (int u = 0; u < n_train; ++u) clean_feats[u] = extract_features(corpus[u].waveform, fcfg);

    std::vector<const Utterance*> val;
    for (int u = n_train; u < n_total; ++u) val.push_back(&corpus[u]);
    if (val.empty())
        for (int u = 0; u < n_train; ++u) val.push_back(&corpus[u]);  // fall back to train-set accuracy

    nn::AdamW opt(options.optim);
    Rng route_rng(derive_seed(options.seed, "routing"));
    Rng noise_rng(derive_seed(options.seed, "noise"));

    TrainResult result;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        std::vector<int> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(derive_seed(options.seed, "shuffle", static_cast<uint64_t>(epoch)));
        for (int i = n_train - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform_int(0, i));
            std::swap(order[i], order[j]);
        }

        LossBreakdown sum;
        int n_steps = 0;
        for (int start = 0; start < n_train; start += options.batch_size) {
            const int end = std::min(start + options.batch_size, n_train);
            std::vector<const FeatureMatrix*> feats;
            std::vector<const Waveform*> waves;
            std::vector<const std::vector<int>*> labels;
            for (int b = start; b < end; ++b) {
                const int u = order[b];
                feats.push_back(&clean_feats[u]);
                waves.push_back(&corpus[u].waveform);
                labels.push_back(&corpus[u].labels);
            }
            const double lr_scale =
                options.warmup_steps > 0
                    ? std::min(1.0, static_cast<double>(opt.step_count() + 1) / options.warmup_steps)
                    : 1.0;
            LossBreakdown step;
            try {
                step = step_on_features(model, feats, waves, labels, fcfg, noise, weights, opt,
                                        lr_scale, route_rng, noise_rng, pools, {});
            } catch (const std::exception& e) {
                throw std::runtime_error("train: diverged at epoch " + std::to_string(epoch) +
                                         " step " + std::to_string(n_steps) + ": " + e.what());
            }
            sum.task += step.task;
            sum.consensus += step.consensus;
            sum.commitment += step.commitment;
            sum.codebook += step.codebook;
            sum.total += step.total;
            ++n_steps;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.mean_loss = {sum.task / n_steps, sum.consensus / n_steps, sum.commitment / n_steps,
                           sum.codebook / n_steps, sum.total / n_steps};
        stats.val_frame_accuracy = frame_accuracy(model, val, fcfg);
        result.history.push_back(stats);
    }
    return result;
}

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot write " + path);
    out << "epoch,task,consensus,commitment,codebook,total,val_frame_accuracy\n";
    char buf[256];
    for (const auto& e : history) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e.epoch,
                      e.mean_loss.task, e.mean_loss.consensus, e.mean_loss.commitment,
                      e.mean_loss.codebook, e.mean_loss.total, e.val_frame_accuracy);
        out << buf;
    }
}

}  // namespace votetok
