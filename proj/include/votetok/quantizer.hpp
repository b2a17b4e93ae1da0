#pragma once

#include <cstdint>
#include <vector>

#include "votetok/nn.hpp"

namespace votetok {

// Multi-branch binarizing quantizer: n parallel projections of the hidden
// state, each binarized by sign, merged by a per-bit majority vote. An odd
// branch count means no ties; the voted bits form the token index.
struct QuantizerConfig {
    int n_branches = 5;  // odd
    int code_dim = 13;   // d; codebook size 2^d
    int hidden_dim = 0;  // D
    bool ste_clip = false;

    void validate() const;
};

// Per-branch projection parameters: W_i is [d x D], b_i is [d].
struct BranchBank {
    std::vector<nn::Array> w;
    std::vector<nn::Array> b;

    int n_branches() const { return static_cast<int>(w.size()); }
    int code_dim() const { return w.empty() ? 0 : w[0].rows(); }
    int hidden_dim() const { return w.empty() ? 0 : w[0].cols(); }
};

// Independent uniform(-1/sqrt(D), 1/sqrt(D)) weights per branch, zero
// biases, distinct sub-seeds so branches start decorrelated.
BranchBank init_branch_bank(const QuantizerConfig& cfg, uint64_t seed);

using BinaryCode = std::vector<int8_t>;  // entries in {-1, +1}
using TokenId = uint32_t;

// ---- plain (inference) path ----

// p_i = W_i h + b_i for one branch.
std::vector<double> project_one(const BranchBank& bank, int branch, const std::vector<double>& h);

// sign with sign(0) = +1.
BinaryCode binarize_plain(const std::vector<double>& p);

// Per-dimension mean of the branch codes; entries in [-1, 1] on a 2/n grid.
std::vector<double> aggregate_train_plain(const std::vector<BinaryCode>& codes);

// Per-bit strict majority (sign of the mean). Branch count must be odd.
BinaryCode aggregate_infer(const std::vector<BinaryCode>& codes);

// Bit j carries weight 2^j; +1 maps to 1, -1 to 0. Mutual inverses.
TokenId code_to_token(const BinaryCode& code);
BinaryCode token_to_code(TokenId k, int code_dim);

// Full inference step for one hidden frame: project all branches, binarize,
// vote, map to the token index. Read-only on the bank; safe concurrently.
TokenId quantize_frame_infer(const BranchBank& bank, const std::vector<double>& h);

// ---- tape (training) path ----

// Branch projections of pooled hidden frames; inputs[i] is the hidden
// sequence branch i sees (clean or perturbed).
std::vector<nn::Var> project(nn::Tape& tape, const std::vector<nn::Var>& inputs,
                             const std::vector<nn::Var>& w, const std::vector<nn::Var>& b);

nn::Var binarize(nn::Tape& tape, nn::Var pre_quant, bool ste_clip = false);

// Bit-wise average across branches; the training-time consensus score.
nn::Var aggregate_train(nn::Tape& tape, const std::vector<nn::Var>& codes);

}  // namespace votetok
