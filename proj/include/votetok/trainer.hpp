#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "votetok/corpus.hpp"
#include "votetok/model.hpp"
#include "votetok/noise.hpp"

namespace votetok {

struct LossWeights {
    double consensus = 0.25;         // lambda1
    double commitment = 0.25;        // lambda2
    double codebook_entropy = 1.0;   // lambda3

    void validate() const;
};

// Waveform-level augmentation for training. When enabled, each utterance is
// perturbed once per step and a random minority of branches sees the
// perturbed stream; k is redrawn uniformly from [1, (n-1)/2] every call.
struct NoiseAwareConfig {
    bool enabled = true;
    std::vector<PerturbationSpec> specs;
};

struct LossBreakdown {
    double task = 0.0;
    double consensus = 0.0;
    double commitment = 0.0;
    double codebook = 0.0;
    double total = 0.0;
};

struct TrainOptions {
    int epochs = 4;
    int batch_size = 8;
    nn::AdamWConfig optim;
    int warmup_steps = 100;
    double val_fraction = 0.1;  // tail of the corpus held out for clean eval
    uint64_t seed = 1;
};

struct EpochStats {
    int epoch = 0;
    LossBreakdown mean_loss;
    double val_frame_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
};

// Alternate graph modes used by the gradient-check harness and ablations.
struct TrainGraphOptions {
    bool identity_surrogate = false;   // skip the sign on the aggregation path
    bool stop_grad_consensus_mean = false;
};

// true = branch receives the perturbed stream. Fewer than n/2 entries are
// ever true; with n = 1 no branch is perturbed.
std::vector<bool> route_branches(int n, Rng& rng);

// ---- loss graphs (exposed for tests) ----

// Mean over frames of the per-branch squared deviation from the all-branch
// mean: (1/(T n)) sum_t sum_i ||p_i - p_bar||^2.
nn::Var consensus_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant,
                       bool stop_grad_mean = false);

// Mean of (p - sg(sign p))^2 over branches, frames and dims.
nn::Var commitment_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant);

// Confident-and-uniform code usage objective (see Tape::entropy_loss).
nn::Var codebook_entropy_loss(nn::Tape& tape, const std::vector<nn::Var>& pre_quant);

// Full loss graph for one batch. Fills `breakdown` from tape values and
// returns the total-loss var; `routes`/`perturbed` give per-utterance branch
// assignments and perturbed feature matrices (empty when noise-aware
// training is off).
struct BatchGraph {
    nn::Var total;
    LossBreakdown breakdown;
    std::vector<nn::Var> params;            // leaves, in for_each_param order
    std::vector<std::string> param_names;
};
BatchGraph build_batch_graph(nn::Tape& tape, const Model& model,
                             const std::vector<const FeatureMatrix*>& clean_feats,
                             const std::vector<const FeatureMatrix*>& perturbed_feats,
                             const std::vector<const std::vector<int>*>& labels,
                             const std::vector<std::vector<bool>>& routes,
                             const LossWeights& weights, const TrainGraphOptions& opts = {});

// One optimizer update on a batch of utterances.
LossBreakdown train_step(Model& model, const std::vector<const Utterance*>& batch,
                         const FeatureConfig& fcfg, const NoiseAwareConfig& noise,
                         const LossWeights& weights, nn::AdamW& opt, double lr_scale,
                         Rng& route_rng, Rng& noise_rng, const NoisePoolMap& pools,
                         const TrainGraphOptions& opts = {});

// Full training run; deterministic per options.seed. The tail val_fraction
// of the corpus is held out and scored per epoch.
TrainResult train(Model& model, const std::vector<Utterance>& corpus, const FeatureConfig& fcfg,
                  const TrainOptions& options, const NoiseAwareConfig& noise,
                  const LossWeights& weights, const NoisePoolMap& pools);

// Clean frame accuracy of the proxy head on pooled labels.
double frame_accuracy(const Model& model, const std::vector<const Utterance*>& utts,
                      const FeatureConfig& fcfg);

void write_history_csv(const std::vector<EpochStats>& history, const std::string& path);

}  // namespace votetok
