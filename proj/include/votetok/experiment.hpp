#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "votetok/corpus.hpp"
#include "votetok/metrics.hpp"
#include "votetok/model.hpp"
#include "votetok/trainer.hpp"

namespace votetok {

// Pool directories for the real-noise family. When `generate` is set and a
// directory is empty, a synthetic pool is created under the output
// directory (deterministic from the experiment seed).
struct NoisePoolConfig {
    bool generate = true;
    std::string train_dir;
    std::string ood_dir;
    int n_train_clips = 24;
    int n_ood_clips = 12;
};

// Everything a run needs, parsed from one JSON file. Unknown keys are
// rejected; validation reports every violation, not just the first.
struct ExperimentConfig {
    uint64_t seed = 1;
    std::string out_dir = "out";

    CorpusSpec corpus;
    int n_eval_utterances = 200;
    FeatureConfig features;
    ModelConfig model;  // feature_dim/n_classes are derived, not configured
    NoiseAwareConfig noise_aware;
    bool noise_specs_default = true;  // specs section absent or "default"
    LossWeights loss_weights;
    TrainOptions train_options;
    std::vector<EvalCase> eval_suite;
    bool eval_suite_default = true;
    int eval_workers = 1;
    NoisePoolConfig pools;
};

// Parses and validates; on any violation returns them and leaves the config
// unspecified. The default config (empty JSON object) is valid.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         std::vector<std::string>& violations);
ExperimentConfig load_experiment_config(const std::string& path, std::vector<std::string>& violations);

// Canonical JSON of the resolved config (sorted keys).
std::string experiment_config_json(const ExperimentConfig& cfg);

// FNV-1a hash of the canonical config JSON, hex-encoded.
std::string config_hash(const ExperimentConfig& cfg);

// Ensures noise pool directories exist (generating them if requested) and
// binds default training specs / eval suite to them.
void resolve_noise_pools(ExperimentConfig& cfg);

// Writes <out_dir>/<command>_manifest.json. Timestamps live only here.
void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs);

// ---- experiment drivers (shared by the CLI and the acceptance suite) ----

struct TrainArtifacts {
    Model model;
    TrainResult result;
};

// Deterministic corpora for a config: training corpus from the root seed,
// evaluation corpus from an independent stream.
std::vector<Utterance> make_train_corpus(const ExperimentConfig& cfg);
std::vector<Utterance> make_eval_corpus(const ExperimentConfig& cfg);

// Synthesizes the corpus and trains one model.
TrainArtifacts run_training(const ExperimentConfig& cfg);

// Evaluates a trained model on a fresh eval corpus over the config's suite.
RobustnessReport run_eval(const ExperimentConfig& cfg, const Model& model);

// Table-4-style sequential ablation: full, w/o consensus loss, w/o
// noise-aware training, single branch; optionally extra full-model voter
// counts (for the voter-count trend). n_seeds independent replicates per
// variant; corpora and eval noise draws are paired across variants.
struct AblationRun {
    std::string variant;
    int seed_index = 0;
    double avg_ued = 0.0;
    double clean_fer = 0.0;
    double final_val_accuracy = 0.0;
    std::map<std::string, double> row_ued;
};

struct AblationSummary {
    std::vector<AblationRun> runs;

    // Mean avg-UED / clean-FER over seed replicates of one variant.
    double mean_avg_ued(const std::string& variant) const;
    double mean_clean_fer(const std::string& variant) const;
};

AblationSummary run_ablation(const ExperimentConfig& cfg, const std::vector<int>& extra_voters,
                             int n_seeds, const std::string& out_dir,
                             const std::function<void(const std::string&)>& progress = {});

void write_ablation_csv(const AblationSummary& summary, const std::string& path);

}  // namespace votetok
