#pragma once

#include <functional>
#include <string>
#include <vector>

#include "votetok/features.hpp"
#include "votetok/nn.hpp"
#include "votetok/quantizer.hpp"
#include "votetok/wav.hpp"

namespace votetok {

struct ModelConfig {
    int feature_dim = 0;     // filterbank bands
    int encoder_hidden = 64; // width of the first encoder layer
    int hidden_dim = 0;      // D, the quantizer input width
    int pool_factor = 2;
    QuantizerConfig quantizer;  // quantizer.hidden_dim must equal hidden_dim
    int n_classes = 0;          // proxy-task vocabulary V

    void validate() const;
};

// Fixed affine input map applied before the encoder. Log filterbank values
// live in roughly [log(1e-8), 2.5]; this recenters them near zero.
nn::Array model_input(const FeatureMatrix& feats);

// Two affine+relu encoder layers, average pooling over time, the
// multi-branch quantizer, and a linear class head on the consensus score.
struct Model {
    ModelConfig cfg;
    nn::Array enc_w1, enc_b1;  // [H x F], [H]
    nn::Array enc_w2, enc_b2;  // [D x H], [D]
    BranchBank bank;
    nn::Array head_w, head_b;  // [V x d], [V]

    static Model init(const ModelConfig& cfg, uint64_t seed);

    void for_each_param(const std::function<void(const std::string&, nn::Array&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const nn::Array&)>& fn) const;
    int64_t param_count() const;

    // Plain inference path (read-only, safe for concurrent callers).
    // Encoded-and-pooled hidden frames, [Tp][D].
    std::vector<std::vector<double>> encode_pooled(const FeatureMatrix& feats) const;
    // One token per pooled frame.
    std::vector<TokenId> tokenize_features(const FeatureMatrix& feats) const;
    std::vector<TokenId> tokenize(const Waveform& w, const FeatureConfig& fcfg) const;
    // Head argmax per pooled frame (the proxy-task prediction).
    std::vector<int> predict_labels(const FeatureMatrix& feats) const;
};

// Label of a pooled frame = label of its first constituent frame.
std::vector<int> pool_labels(const std::vector<int>& labels, int factor);

// Versioned JSON checkpoint of named arrays with shapes.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

// Token sequences as JSONL: a header record carrying the code dimension,
// then one {"id", "tokens"} record per utterance.
void write_tokens_jsonl(const std::vector<std::pair<std::string, std::vector<TokenId>>>& seqs,
                        int code_dim, const std::string& path);
std::vector<std::pair<std::string, std::vector<TokenId>>> read_tokens_jsonl(const std::string& path,
                                                                            int* code_dim = nullptr);

}  // namespace votetok
