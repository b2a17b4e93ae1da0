#include "votetok/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "votetok/fft.hpp"
#include "votetok/trainer.hpp"

using nlohmann::json;

namespace votetok {

namespace {

template <typename T>
int64_t lev_impl(const std::vector<T>& a, const std::vector<T>& b) {
    const size_t n = a.size(), m = b.size();
    if (n == 0) return static_cast<int64_t>(m);
    if (m == 0) return static_cast<int64_t>(n);

    std::vector<int64_t> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<int64_t>(i);
        for (size_t j = 1; j <= m; ++j) {
            const int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

}  // namespace

int64_t levenshtein(const std::vector<TokenId>& a, const std::vector<TokenId>& b) {
    return lev_impl(a, b);
}

int64_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) { return lev_impl(a, b); }

double ued_percent(const std::vector<TokenId>& clean_tokens, const std::vector<TokenId>& noisy_tokens) {
    if (clean_tokens.empty()) throw std::invalid_argument("ued_percent: empty clean sequence");
    return 100.0 * static_cast<double>(levenshtein(clean_tokens, noisy_tokens)) /
           static_cast<double>(clean_tokens.size());
}

double frame_error_rate(const std::vector<int>& pred, const std::vector<int>& gold) {
    if (pred.size() != gold.size()) throw std::invalid_argument("frame_error_rate: length mismatch");
    if (pred.empty()) throw std::invalid_argument("frame_error_rate: empty sequences");
    int64_t wrong = 0;
    for (size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != gold[i];
    return 100.0 * static_cast<double>(wrong) / static_cast<double>(pred.size());
}

double psd_slope(const Waveform& w) {
    constexpr size_t kSegment = 1024;
    constexpr size_t kHop = kSegment / 2;
    if (w.samples.size() < 4096) throw std::invalid_argument("psd_slope: need at least 4096 samples");

    std::vector<double> window(kSegment);
    for (size_t i = 0; i < kSegment; ++i)
        window[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / (kSegment - 1));

    std::vector<double> psd(kSegment / 2 + 1, 0.0);
    size_t n_segments = 0;
    std::vector<std::complex<double>> buf(kSegment);
    for (size_t start = 0; start + kSegment <= w.samples.size(); start += kHop) {
        for (size_t i = 0; i < kSegment; ++i) buf[i] = {w.samples[start + i] * window[i], 0.0};
        fft_inplace(buf);
        for (size_t k = 0; k <= kSegment / 2; ++k) psd[k] += std::norm(buf[k]);
        ++n_segments;
    }
    for (auto& p : psd) p /= static_cast<double>(n_segments);

    const double bin_hz = static_cast<double>(w.sample_rate_hz) / kSegment;
    const double f_lo = 20.0;
    const double f_hi = 0.4 * (w.sample_rate_hz / 2.0);

    // Least squares on (log10 f, log10 PSD).
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    int n_pts = 0;
    for (size_t k = 1; k <= kSegment / 2; ++k) {
        const double f = k * bin_hz;
        if (f < f_lo || f > f_hi) continue;
        if (psd[k] <= 0.0) continue;
        const double x = std::log10(f);
        const double y = std::log10(psd[k]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n_pts;
    }
    if (n_pts < 2) throw std::runtime_error("psd_slope: too few spectral points in the fit range");
    return (n_pts * sxy - sx * sy) / (n_pts * sxx - sx * sx);
}

RobustnessReport eval_robustness(const Model& model, const std::vector<Utterance>& corpus,
                                 const std::vector<EvalCase>& suite, const FeatureConfig& fcfg,
                                 uint64_t seed, const NoisePoolMap& pools, int workers) {
    if (corpus.empty()) throw std::invalid_argument("eval_robustness: empty corpus");
    if (suite.empty()) throw std::invalid_argument("eval_robustness: empty suite");
    if (workers < 1) workers = 1;

    struct Cell {
        double ued = 0.0;
        double intensity = 0.0;
    };
    std::vector<std::vector<Cell>> cells(suite.size(), std::vector<Cell>(corpus.size()));

    auto run_range = [&](size_t lo, size_t hi) {
        for (size_t u = lo; u < hi; ++u) {
            const FeatureMatrix clean_feats = extract_features(corpus[u].waveform, fcfg);
            const auto clean_tokens = model.tokenize_features(clean_feats);
            for (size_t r = 0; r < suite.size(); ++r) {
                Rng rng(derive_seed(seed, "eval/" + suite[r].name, static_cast<uint64_t>(u)));
                auto [wp, applied] = perturb(corpus[u].waveform, {suite[r].spec}, rng, pools);
                const auto noisy_tokens = model.tokenize(wp, fcfg);
                cells[r][u] = {ued_percent(clean_tokens, noisy_tokens), applied.realized_intensity};
            }
        }
    };

    if (workers == 1) {
        run_range(0, corpus.size());
    } else {
        std::vector<std::thread> threads;
        const size_t per = (corpus.size() + workers - 1) / workers;
        for (int t = 0; t < workers; ++t) {
            const size_t lo = std::min(corpus.size(), static_cast<size_t>(t) * per);
            const size_t hi = std::min(corpus.size(), lo + per);
            if (lo < hi) threads.emplace_back(run_range, lo, hi);
        }
        for (auto& th : threads) th.join();
    }

    RobustnessReport report;
    for (size_t r = 0; r < suite.size(); ++r) {
        RobustnessRow row;
        row.name = suite[r].name;
        row.count = static_cast<int>(corpus.size());
        double sum = 0.0;
        for (const auto& c : cells[r]) sum += c.ued;
        row.mean_ued = sum / row.count;
        double var = 0.0;
        for (const auto& c : cells[r]) var += (c.ued - row.mean_ued) * (c.ued - row.mean_ued);
        row.stddev_ued = row.count > 1 ? std::sqrt(var / (row.count - 1)) : 0.0;
        report.rows.push_back(row);
        for (size_t u = 0; u < corpus.size(); ++u)
            report.items.push_back(
                {corpus[u].utterance_id, suite[r].name, cells[r][u].intensity, cells[r][u].ued});
    }
    double avg = 0.0;
    for (const auto& row : report.rows) avg += row.mean_ued;
    report.average_ued = avg / static_cast<double>(report.rows.size());

    std::vector<const Utterance*> ptrs;
    for (const auto& u : corpus) ptrs.push_back(&u);
    report.clean_frame_error_rate = 100.0 * (1.0 - frame_accuracy(model, ptrs, fcfg));
    return report;
}

void write_report_json(const RobustnessReport& report, const std::string& path) {
    json rows = json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"name", r.name},
                        {"mean_ued", r.mean_ued},
                        {"stddev_ued", r.stddev_ued},
                        {"count", r.count}});
    const json j = {{"rows", rows},
                    {"average_ued", report.average_ued},
                    {"clean_frame_error_rate", report.clean_frame_error_rate}};
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_json: cannot write " + path);
    out << j.dump(2) << "\n";
}

void write_report_csv(const RobustnessReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_report_csv: cannot write " + path);
    out << "utterance_id,perturbation,realized_intensity,ued\n";
    char buf[256];
    for (const auto& item : report.items) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g\n", item.utterance_id.c_str(),
                      item.perturbation.c_str(), item.realized_intensity, item.ued);
        out << buf;
    }
}

}  // namespace votetok
