#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "votetok/quantizer.hpp"
#include "votetok/rng.hpp"

using namespace votetok;

namespace {

BinaryCode code_of(std::initializer_list<int> bits) {
    BinaryCode c;
    for (int b : bits) c.push_back(static_cast<int8_t>(b));
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    QuantizerConfig cfg;
    cfg.hidden_dim = 8;
    cfg.n_branches = 4;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.n_branches = 5;
    cfg.code_dim = 31;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.code_dim = 13;
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("projection basics") {
    QuantizerConfig cfg;
    cfg.n_branches = 3;
    cfg.code_dim = 4;
    cfg.hidden_dim = 4;
    BranchBank bank = init_branch_bank(cfg, 1);

    SUBCASE("zero weights and biases give zero") {
        for (auto& w : bank.w) std::fill(w.v.begin(), w.v.end(), 0.0);
        const auto p = project_one(bank, 0, {1.0, 2.0, 3.0, 4.0});
        for (double e : p) CHECK(e == 0.0);
    }
    SUBCASE("identity weights pass the hidden state through") {
        for (auto& w : bank.w) {
            std::fill(w.v.begin(), w.v.end(), 0.0);
            for (int i = 0; i < 4; ++i) w.v[i * 4 + i] = 1.0;
        }
        const std::vector<double> h = {0.1, -0.2, 0.3, -0.4};
        CHECK(project_one(bank, 1, h) == h);
    }
    SUBCASE("matches a naive matvec oracle") {
        Rng rng(8);
        const std::vector<double> h = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        for (int br = 0; br < 3; ++br) {
            const auto p = project_one(bank, br, h);
            for (int j = 0; j < 4; ++j) {
                double expect = bank.b[br].v[j];
                for (int i = 0; i < 4; ++i) expect += bank.w[br].v[j * 4 + i] * h[i];
                CHECK(p[j] == doctest::Approx(expect).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("branches start decorrelated") {
    QuantizerConfig cfg;
    cfg.n_branches = 5;
    cfg.code_dim = 8;
    cfg.hidden_dim = 16;
    const BranchBank bank = init_branch_bank(cfg, 7);
    for (int i = 1; i < 5; ++i) CHECK(bank.w[0].v != bank.w[i].v);
    const double bound = 1.0 / std::sqrt(16.0);
    for (const auto& w : bank.w)
        for (double e : w.v) CHECK(std::abs(e) <= bound);
}

TEST_CASE("aggregate_train arithmetic") {
    CHECK(aggregate_train_plain({code_of({1}), code_of({1}), code_of({1})})[0] == 1.0);
    CHECK(aggregate_train_plain({code_of({1}), code_of({1}), code_of({1}), code_of({-1}),
                                 code_of({-1})})[0] == doctest::Approx(0.2));
    CHECK(aggregate_train_plain({code_of({1}), code_of({-1}), code_of({-1})})[0] ==
          doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("aggregate_infer is the per-bit majority") {
    SUBCASE("unanimous branches") {
        const BinaryCode b = code_of({1, -1, 1, -1});
        CHECK(aggregate_infer({b, b, b}) == b);
    }
    SUBCASE("two fully flipped branches lose to three clean ones") {
        const BinaryCode clean = code_of({1, -1, 1, -1, 1});
        BinaryCode flipped = clean;
        for (auto& bit : flipped) bit = -bit;
        CHECK(aggregate_infer({clean, flipped, clean, flipped, clean}) == clean);
    }
    SUBCASE("even branch counts are rejected") {
        const BinaryCode b = code_of({1});
        CHECK_THROWS_AS(aggregate_infer({b, b}), std::invalid_argument);
    }
}

TEST_CASE("exhaustive majority semantics for small branch/bit counts") {
    // Full enumeration over every branch-bit assignment.
    for (const int n : {1, 3, 5}) {
        for (const int d : {1, 2, 3}) {
            const int bits = n * d;
            for (uint32_t pattern = 0; pattern < (1u << bits); ++pattern) {
                std::vector<BinaryCode> codes(n, BinaryCode(d));
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        codes[i][j] = (pattern >> (i * d + j)) & 1u ? 1 : -1;
                const BinaryCode voted = aggregate_infer(codes);
                for (int j = 0; j < d; ++j) {
                    int ones = 0;
                    for (int i = 0; i < n; ++i) ones += codes[i][j] == 1;
                    CHECK(voted[j] == (2 * ones > n ? 1 : -1));
                }
            }
        }
    }
    // n = 7 is too wide to enumerate jointly; votes are per-bit, so checking
    // every 7-vote column pattern is exhaustive for each bit position.
    const int n = 7;
    for (uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
        std::vector<BinaryCode> codes(n, BinaryCode(1));
        int ones = 0;
        for (int i = 0; i < n; ++i) {
            codes[i][0] = (pattern >> i) & 1u ? 1 : -1;
            ones += (pattern >> i) & 1u;
        }
        CHECK(aggregate_infer(codes)[0] == (2 * ones > n ? 1 : -1));
    }
}

TEST_CASE("sign of aggregate_train equals aggregate_infer") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 * static_cast<int>(rng.uniform_int(0, 3)) + 1;
        const int d = static_cast<int>(rng.uniform_int(1, 10));
        std::vector<BinaryCode> codes(n, BinaryCode(d));
        for (auto& code : codes)
            for (auto& bit : code) bit = rng.uniform() < 0.5 ? 1 : -1;
        const auto s = aggregate_train_plain(codes);
        const auto voted = aggregate_infer(codes);
        for (int j = 0; j < d; ++j) CHECK(voted[j] == (s[j] >= 0.0 ? 1 : -1));
    }
}

TEST_CASE("token mapping extremes and paper bit strings") {
    CHECK(code_to_token(BinaryCode(13, -1)) == 0);
    CHECK(code_to_token(BinaryCode(13, 1)) == 8191);

    // 3485 has low bits 10111011... check known pairs: flipping bit 5 of
    // 3485 gives 3517; flipping bit 4 of 5517 gives 5533.
    CHECK((3485u ^ (1u << 5)) == 3517u);
    CHECK((5517u ^ (1u << 4)) == 5533u);
    const BinaryCode c3485 = token_to_code(3485, 13);
    // Low 8 bits of 3485 are 10011101 (LSB first: 1,0,1,1,1,0,0,1).
    const int expect_low[8] = {1, 0, 1, 1, 1, 0, 0, 1};
    for (int j = 0; j < 8; ++j) CHECK(c3485[j] == (expect_low[j] ? 1 : -1));
    CHECK(code_to_token(c3485) == 3485);

    BinaryCode flipped = c3485;
    flipped[5] = -flipped[5];
    CHECK(code_to_token(flipped) == 3517);
}

TEST_CASE("token mapping is a bijection") {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const int d = static_cast<int>(rng.uniform_int(1, 13));
        BinaryCode code(d);
        for (auto& bit : code) bit = rng.uniform() < 0.5 ? 1 : -1;
        CHECK(token_to_code(code_to_token(code), d) == code);
    }
    // Exhaustive for small d: every token distinct and invertible.
    for (int d = 1; d <= 10; ++d) {
        std::vector<bool> seen(1u << d, false);
        for (TokenId k = 0; k < (1u << d); ++k) {
            const TokenId back = code_to_token(token_to_code(k, d));
            CHECK(back == k);
            CHECK(!seen[back]);
            seen[back] = true;
        }
    }
    CHECK_THROWS_AS(token_to_code(8192, 13), std::invalid_argument);
}

TEST_CASE("error correction: sparse per-bit flips never change the vote") {
    Rng rng(14);
    int token_majority_wrong_cases = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = 2 * static_cast<int>(rng.uniform_int(1, 3)) + 1;  // 3, 5, 7
        const int d = static_cast<int>(rng.uniform_int(2, 10));
        BinaryCode reference(d);
        for (auto& bit : reference) bit = rng.uniform() < 0.5 ? 1 : -1;

        // Per bit, corrupt strictly fewer than ceil(n/2) branches.
        std::vector<BinaryCode> codes(n, reference);
        for (int j = 0; j < d; ++j) {
            const int flips = static_cast<int>(rng.uniform_int(0, (n - 1) / 2));
            std::vector<int> order(n);
            for (int i = 0; i < n; ++i) order[i] = i;
            for (int f = 0; f < flips; ++f) {
                const int pick = static_cast<int>(rng.uniform_int(f, n - 1));
                std::swap(order[f], order[pick]);
                codes[order[f]][j] = -codes[order[f]][j];
            }
        }
        int wrong_tokens = 0;
        for (const auto& code : codes) wrong_tokens += code != reference;
        token_majority_wrong_cases += 2 * wrong_tokens > n;

        CHECK(aggregate_infer(codes) == reference);
    }
    // The construction must also exercise token-level majority corruption.
    CHECK(token_majority_wrong_cases > 20);
}

TEST_CASE("quantize_frame_infer composes the pipeline") {
    QuantizerConfig cfg;
    cfg.n_branches = 5;
    cfg.code_dim = 6;
    cfg.hidden_dim = 8;
    BranchBank bank = init_branch_bank(cfg, 21);
    Rng rng(22);
    std::vector<double> h(8);
    for (auto& e : h) e = rng.normal();

    SUBCASE("matches the step-by-step oracle") {
        std::vector<BinaryCode> codes;
        for (int i = 0; i < 5; ++i) codes.push_back(binarize_plain(project_one(bank, i, h)));
        CHECK(quantize_frame_infer(bank, h) == code_to_token(aggregate_infer(codes)));
    }
    SUBCASE("identical branches behave like one branch") {
        for (int i = 1; i < 5; ++i) {
            bank.w[i] = bank.w[0];
            bank.b[i] = bank.b[0];
        }
        CHECK(quantize_frame_infer(bank, h) ==
              code_to_token(binarize_plain(project_one(bank, 0, h))));
    }
    SUBCASE("zero hidden state with zero bias gives the all-ones token") {
        const std::vector<double> zero(8, 0.0);
        CHECK(quantize_frame_infer(bank, zero) == (1u << 6) - 1);  // sign(0) = +1 on every bit
    }
}

TEST_CASE("tape projection agrees with the plain path") {
    QuantizerConfig cfg;
    cfg.n_branches = 3;
    cfg.code_dim = 5;
    cfg.hidden_dim = 7;
    const BranchBank bank = init_branch_bank(cfg, 33);
    Rng rng(34);
    nn::Array h = nn::Array::zeros({2, 7});
    for (auto& e : h.v) e = rng.normal();

    nn::Tape tape;
    const nn::Var hv = tape.leaf(h, false);
    std::vector<nn::Var> w, b;
    for (int i = 0; i < 3; ++i) {
        w.push_back(tape.leaf(bank.w[i], false));
        b.push_back(tape.leaf(bank.b[i], false));
    }
    const auto pre = project(tape, {hv, hv, hv}, w, b);
    const auto s = aggregate_train(tape, {binarize(tape, pre[0]), binarize(tape, pre[1]),
                                          binarize(tape, pre[2])});
    for (int row = 0; row < 2; ++row) {
        const std::vector<double> h_row(h.v.begin() + row * 7, h.v.begin() + (row + 1) * 7);
        std::vector<BinaryCode> codes;
        for (int i = 0; i < 3; ++i) {
            const auto p_plain = project_one(bank, i, h_row);
            for (int j = 0; j < 5; ++j)
                CHECK(tape.value(pre[i]).v[row * 5 + j] == doctest::Approx(p_plain[j]).epsilon(1e-14));
            codes.push_back(binarize_plain(p_plain));
        }
        const auto s_plain = aggregate_train_plain(codes);
        for (int j = 0; j < 5; ++j)
            CHECK(tape.value(s).v[row * 5 + j] == doctest::Approx(s_plain[j]));
    }
}
