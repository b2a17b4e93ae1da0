#include "votetok/quantizer.hpp"

#include <cmath>
#include <stdexcept>

#include "votetok/rng.hpp"

namespace votetok {

void QuantizerConfig::validate() const {
    if (n_branches <= 0 || n_branches % 2 == 0)
        throw std::invalid_argument("QuantizerConfig: n_branches must be odd and positive");
    if (code_dim < 1 || code_dim > 30)
        throw std::invalid_argument("QuantizerConfig: code_dim must be in [1, 30]");
    if (hidden_dim <= 0) throw std::invalid_argument("QuantizerConfig: hidden_dim must be positive");
}

BranchBank init_branch_bank(const QuantizerConfig& cfg, uint64_t seed) {
    cfg.validate();
    BranchBank bank;
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim));
    for (int i = 0; i < cfg.n_branches; ++i) {
        Rng rng(derive_seed(seed, "branch", static_cast<uint64_t>(i)));
        nn::Array w = nn::Array::zeros({cfg.code_dim, cfg.hidden_dim});
        for (auto& e : w.v) e = rng.uniform(-bound, bound);
        bank.w.push_back(std::move(w));
        bank.b.push_back(nn::Array::zeros({cfg.code_dim}));
    }
    return bank;
}

std::vector<double> project_one(const BranchBank& bank, int branch, const std::vector<double>& h) {
    const int d = bank.code_dim(), hd = bank.hidden_dim();
    if (static_cast<int>(h.size()) != hd)
        throw std::invalid_argument("project_one: hidden dim mismatch");
    const nn::Array& w = bank.w[branch];
    const nn::Array& b = bank.b[branch];
    std::vector<double> p(d);
    for (int j = 0; j < d; ++j) {
        double acc = b.v[j];
        const double* wj = w.v.data() + static_cast<size_t>(j) * hd;
        for (int i = 0; i < hd; ++i) acc += wj[i] * h[i];
        p[j] = acc;
    }
    return p;
}

BinaryCode binarize_plain(const std::vector<double>& p) {
    BinaryCode code(p.size());
    for (size_t j = 0; j < p.size(); ++j) code[j] = p[j] >= 0.0 ? 1 : -1;
    return code;
}

std::vector<double> aggregate_train_plain(const std::vector<BinaryCode>& codes) {
    if (codes.empty()) throw std::invalid_argument("aggregate_train: no codes");
    const size_t d = codes[0].size();
    std::vector<double> s(d, 0.0);
    for (const auto& code : codes) {
        if (code.size() != d) throw std::invalid_argument("aggregate_train: code dim mismatch");
        for (size_t j = 0; j < d; ++j) s[j] += code[j];
    }
    for (auto& e : s) e /= static_cast<double>(codes.size());
    return s;
}

BinaryCode aggregate_infer(const std::vector<BinaryCode>& codes) {
    if (codes.size() % 2 == 0) throw std::invalid_argument("aggregate_infer: branch count must be odd");
    const auto s = aggregate_train_plain(codes);
    BinaryCode out(s.size());
    for (size_t j = 0; j < s.size(); ++j) out[j] = s[j] >= 0.0 ? 1 : -1;
    return out;
}

TokenId code_to_token(const BinaryCode& code) {
    if (code.size() > 30) throw std::invalid_argument("code_to_token: code_dim too large");
    TokenId k = 0;
    for (size_t j = 0; j < code.size(); ++j) {
        if (code[j] != 1 && code[j] != -1) throw std::invalid_argument("code_to_token: entries must be +-1");
        if (code[j] == 1) k |= (1u << j);
    }
    return k;
}

BinaryCode token_to_code(TokenId k, int code_dim) {
    if (code_dim < 1 || code_dim > 30) throw std::invalid_argument("token_to_code: bad code_dim");
    if (k >= (1u << code_dim)) throw std::invalid_argument("token_to_code: token out of range");
    BinaryCode code(code_dim);
    for (int j = 0; j < code_dim; ++j) code[j] = (k >> j) & 1u ? 1 : -1;
    return code;
}

TokenId quantize_frame_infer(const BranchBank& bank, const std::vector<double>& h) {
    std::vector<BinaryCode> codes;
    codes.reserve(bank.n_branches());
    for (int i = 0; i < bank.n_branches(); ++i)
        codes.push_back(binarize_plain(project_one(bank, i, h)));
    return code_to_token(aggregate_infer(codes));
}

std::vector<nn::Var> project(nn::Tape& tape, const std::vector<nn::Var>& inputs,
                             const std::vector<nn::Var>& w, const std::vector<nn::Var>& b) {
    if (inputs.size() != w.size() || w.size() != b.size())
        throw std::invalid_argument("project: branch count mismatch");
    std::vector<nn::Var> out;
    out.reserve(w.size());
    for (size_t i = 0; i < w.size(); ++i) out.push_back(tape.affine(inputs[i], w[i], b[i]));
    return out;
}

nn::Var binarize(nn::Tape& tape, nn::Var pre_quant, bool ste_clip) {
    return tape.sign_ste(pre_quant, ste_clip);
}

nn::Var aggregate_train(nn::Tape& tape, const std::vector<nn::Var>& codes) {
    return tape.mean_over(codes);
}

}  // namespace votetok
