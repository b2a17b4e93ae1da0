#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "votetok/corpus.hpp"
#include "votetok/model.hpp"
#include "votetok/noise.hpp"

namespace votetok {

// Minimum insert/delete/substitute count, standard DP.
int64_t levenshtein(const std::vector<TokenId>& a, const std::vector<TokenId>& b);
int64_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);

// 100 * levenshtein(clean, noisy) / len(clean). Normalization is by the
// clean-sequence length.
double ued_percent(const std::vector<TokenId>& clean_tokens, const std::vector<TokenId>& noisy_tokens);

// Percentage of mismatched positions.
double frame_error_rate(const std::vector<int>& pred, const std::vector<int>& gold);

// PSD exponent from a Welch periodogram (1024-sample Hann segments, 50%
// overlap): least-squares slope of log10 PSD against log10 f over
// [20 Hz, 0.4 * Nyquist]. Needs at least 4096 samples.
double psd_slope(const Waveform& w);

struct RobustnessRow {
    std::string name;
    double mean_ued = 0.0;
    double stddev_ued = 0.0;  // sample stddev over utterances
    int count = 0;
};

struct PerItemRecord {
    std::string utterance_id;
    std::string perturbation;
    double realized_intensity = 0.0;
    double ued = 0.0;
};

struct RobustnessReport {
    std::vector<RobustnessRow> rows;
    double average_ued = 0.0;  // unweighted mean over perturbation rows
    double clean_frame_error_rate = 0.0;
    std::vector<PerItemRecord> items;
};

// Tokenizes each utterance clean and perturbed (identical framing) and
// aggregates UED per suite row. Per-utterance perturbation draws use seeds
// derived from (seed, row, utterance), so results are independent of
// worker count and merge order.
RobustnessReport eval_robustness(const Model& model, const std::vector<Utterance>& corpus,
                                 const std::vector<EvalCase>& suite, const FeatureConfig& fcfg,
                                 uint64_t seed, const NoisePoolMap& pools, int workers = 1);

void write_report_json(const RobustnessReport& report, const std::string& path);
void write_report_csv(const RobustnessReport& report, const std::string& path);

}  // namespace votetok
