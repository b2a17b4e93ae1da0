#include "votetok/vote_analysis.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "votetok/rng.hpp"

using nlohmann::json;

namespace votetok {

void FlipModel::validate() const {
    if (n_branches <= 0 || n_branches % 2 == 0)
        throw std::invalid_argument("FlipModel: n_branches must be odd and positive");
    if (code_dim < 1 || code_dim > 30) throw std::invalid_argument("FlipModel: code_dim must be in [1, 30]");
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw std::invalid_argument("FlipModel: flip_prob must be in [0, 1]");
}

namespace {

double binomial_coeff(int n, int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * (n - i) / (i + 1);
    return c;
}

// P(at least ceil(n/2) of n branches flip a given bit).
double bit_majority_flip_prob(int n, double p) {
    const int need = (n + 1) / 2;
    double acc = 0.0;
    for (int j = need; j <= n; ++j)
        acc += binomial_coeff(n, j) * std::pow(p, j) * std::pow(1.0 - p, n - j);
    return acc;
}

}  // namespace

double token_survival_prob(const FlipModel& model) {
    model.validate();
    const double p_maj = bit_majority_flip_prob(model.n_branches, model.flip_prob);
    return std::pow(1.0 - p_maj, model.code_dim);
}

double token_survival_prob_exhaustive(const FlipModel& model) {
    model.validate();
    const int n = model.n_branches, d = model.code_dim;
    const int bits = n * d;
    if (bits > 24) throw std::invalid_argument("token_survival_prob_exhaustive: n*d too large to enumerate");
    const double p = model.flip_prob;

    double survive = 0.0;
    for (uint32_t pattern = 0; pattern < (1u << bits); ++pattern) {
        const int flips = __builtin_popcount(pattern);
        const double prob = std::pow(p, flips) * std::pow(1.0 - p, bits - flips);
        bool ok = true;
        for (int j = 0; j < d && ok; ++j) {
            int votes_flipped = 0;
            for (int i = 0; i < n; ++i) votes_flipped += (pattern >> (i * d + j)) & 1u;
            ok = votes_flipped <= n / 2;  // strict majority of clean bits survives
        }
        if (ok) survive += prob;
    }
    return survive;
}

namespace {

struct McCounts {
    int64_t survived = 0;
    int64_t overridden = 0;  // majority of branches wrong at token level, vote correct
};

McCounts mc_shard(const FlipModel& model, int64_t trials, uint64_t seed) {
    const int n = model.n_branches, d = model.code_dim;
    const double p = model.flip_prob;
    Rng rng(seed);
    McCounts counts;
    std::vector<int> flip_votes(d);
    for (int64_t t = 0; t < trials; ++t) {
        std::fill(flip_votes.begin(), flip_votes.end(), 0);
        int wrong_tokens = 0;
        for (int i = 0; i < n; ++i) {
            bool branch_wrong = false;
            for (int j = 0; j < d; ++j) {
                if (rng.uniform() < p) {
                    ++flip_votes[j];
                    branch_wrong = true;
                }
            }
            wrong_tokens += branch_wrong;
        }
        bool token_ok = true;
        for (int j = 0; j < d; ++j)
            if (flip_votes[j] > n / 2) {
                token_ok = false;
                break;
            }
        counts.survived += token_ok;
        counts.overridden += token_ok && 2 * wrong_tokens > n;
    }
    return counts;
}

McCounts mc_run(const FlipModel& model, int64_t trials, uint64_t seed, int workers) {
    model.validate();
    if (trials < 1) throw std::invalid_argument("monte_carlo: trials must be >= 1");
    if (workers < 1) workers = 1;
    if (workers == 1) return mc_shard(model, trials, derive_seed(seed, "mc", 0));

    std::vector<McCounts> partial(workers);
    std::vector<std::thread> threads;
    const int64_t per = trials / workers;
    for (int s = 0; s < workers; ++s) {
        const int64_t count = s == workers - 1 ? trials - per * (workers - 1) : per;
        threads.emplace_back([&partial, s, &model, count, seed]() {
            partial[s] = mc_shard(model, count, derive_seed(seed, "mc", static_cast<uint64_t>(s)));
        });
    }
    for (auto& th : threads) th.join();
    McCounts total;
    for (const auto& c : partial) {
        total.survived += c.survived;
        total.overridden += c.overridden;
    }
    return total;
}

}  // namespace

McEstimate monte_carlo_survival(const FlipModel& model, int64_t trials, uint64_t seed, int workers) {
    const McCounts counts = mc_run(model, trials, seed, workers);
    McEstimate est;
    est.trials = trials;
    est.estimate = static_cast<double>(counts.survived) / static_cast<double>(trials);
    est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
    return est;
}

double majority_override_rate(const FlipModel& model, int64_t trials, uint64_t seed, int workers) {
    const McCounts counts = mc_run(model, trials, seed, workers);
    return static_cast<double>(counts.overridden) / static_cast<double>(trials);
}

void CaseTable::validate() const {
    if (code_dim < 1 || code_dim > 30) throw std::invalid_argument("CaseTable: code_dim must be in [1, 30]");
    if (positions.empty()) throw std::invalid_argument("CaseTable: no positions");
    const TokenId limit = 1u << code_dim;
    for (const auto& pos : positions) {
        if (pos.voters.empty() || pos.voters.size() % 2 == 0)
            throw std::invalid_argument("CaseTable: voter count must be odd");
        if (pos.reference >= limit) throw std::invalid_argument("CaseTable: reference token out of range");
        for (TokenId v : pos.voters)
            if (v >= limit) throw std::invalid_argument("CaseTable: voter token out of range");
    }
}

CaseTable load_case_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_case_table: cannot open " + path);
    json j;
    in >> j;
    CaseTable table;
    table.code_dim = j.at("code_dim").get<int>();
    for (const auto& p : j.at("positions")) {
        CasePosition pos;
        pos.position = p.at("position").get<int>();
        pos.reference = p.at("reference").get<TokenId>();
        pos.voters = p.at("voters").get<std::vector<TokenId>>();
        table.positions.push_back(std::move(pos));
    }
    table.validate();
    return table;
}

std::vector<TokenId> replay_case(const CaseTable& table) {
    table.validate();
    std::vector<TokenId> out;
    out.reserve(table.positions.size());
    for (const auto& pos : table.positions) {
        std::vector<BinaryCode> codes;
        codes.reserve(pos.voters.size());
        for (TokenId v : pos.voters) codes.push_back(token_to_code(v, table.code_dim));
        out.push_back(code_to_token(aggregate_infer(codes)));
    }
    return out;
}

int64_t voter_param_overhead(int n_branches, int hidden_dim, int code_dim) {
    if (n_branches <= 0 || hidden_dim <= 0 || code_dim <= 0)
        throw std::invalid_argument("voter_param_overhead: dims must be positive");
    return static_cast<int64_t>(n_branches) *
           (static_cast<int64_t>(hidden_dim) * code_dim + code_dim);
}

}  // namespace votetok
