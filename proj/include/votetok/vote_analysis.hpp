#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "votetok/quantizer.hpp"

namespace votetok {

// Idealized flip model: every branch flips every bit independently with
// probability p. An analysis abstraction, not a measured statistic.
struct FlipModel {
    int n_branches = 5;
    int code_dim = 13;
    double flip_prob = 0.1;

    void validate() const;
};

// P(voted token == reference) = (1 - P_maj)^d where P_maj is the tail
// binomial probability that at least ceil(n/2) branches flip one bit.
double token_survival_prob(const FlipModel& model);

// The same bit-majority failure probability, by exhaustive enumeration of
// all 2^(n*d) flip patterns. Feasible only for tiny n*d; used as an oracle.
double token_survival_prob_exhaustive(const FlipModel& model);

struct McEstimate {
    double estimate = 0.0;
    double stderr_ = 0.0;  // binomial standard error
    int64_t trials = 0;
};

// Simulates per-branch per-bit flips and votes. Trials are sharded across
// workers with per-shard derived seeds; the merge is a sum of counts, so
// results are independent of scheduling.
McEstimate monte_carlo_survival(const FlipModel& model, int64_t trials, uint64_t seed, int workers = 1);

// Fraction of trials where MORE than n/2 branches are wrong at the token
// level and the vote still recovers the reference token.
double majority_override_rate(const FlipModel& model, int64_t trials, uint64_t seed, int workers = 1);

// A recorded voting case: per position, a reference token and the n voter
// tokens, all at a known code dimension.
struct CasePosition {
    int position = 0;
    TokenId reference = 0;
    std::vector<TokenId> voters;
};

struct CaseTable {
    int code_dim = 13;
    std::vector<CasePosition> positions;

    void validate() const;
};

CaseTable load_case_table(const std::string& path);

// Decodes voter tokens, votes bit-wise, re-encodes. One output per position.
std::vector<TokenId> replay_case(const CaseTable& table);

// Quantizer parameter count: n * (D * d + d).
int64_t voter_param_overhead(int n_branches, int hidden_dim, int code_dim);

}  // namespace votetok
