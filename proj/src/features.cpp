#include "votetok/features.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "votetok/fft.hpp"

namespace votetok {

namespace {

constexpr double kLogFloor = 1e-8;
constexpr double kMinCenterHz = 60.0;

// Filter edges, geometrically spaced: n_bands + 2 points from kMinCenterHz
// to Nyquist. Filter b rises over [e_b, e_{b+1}] and falls over
// [e_{b+1}, e_{b+2}].
std::vector<double> filter_edges(const FeatureConfig& cfg, int sample_rate_hz) {
    const int n_pts = cfg.n_bands + 2;
    const double f_lo = kMinCenterHz;
    const double f_hi = sample_rate_hz / 2.0;
    std::vector<double> edges(n_pts);
    const double ratio = std::log(f_hi / f_lo) / (n_pts - 1);
    for (int i = 0; i < n_pts; ++i) edges[i] = f_lo * std::exp(ratio * i);
    return edges;
}

}  // namespace

void FeatureConfig::validate() const {
    if (frame_len_samples <= 0) throw std::invalid_argument("FeatureConfig: frame_len_samples must be positive");
    if (hop_samples <= 0) throw std::invalid_argument("FeatureConfig: hop_samples must be positive");
    if (hop_samples > frame_len_samples) throw std::invalid_argument("FeatureConfig: hop must be <= frame_len");
    if (n_bands < 1) throw std::invalid_argument("FeatureConfig: n_bands must be >= 1");
}

int num_frames(size_t n_samples, const FeatureConfig& cfg) {
    cfg.validate();
    if (n_samples < static_cast<size_t>(cfg.frame_len_samples))
        throw std::invalid_argument("num_frames: waveform shorter than one frame");
    return 1 + static_cast<int>((n_samples - cfg.frame_len_samples) / cfg.hop_samples);
}

double band_center_hz(int band, const FeatureConfig& cfg, int sample_rate_hz) {
    const auto edges = filter_edges(cfg, sample_rate_hz);
    return edges[band + 1];
}

FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& cfg) {
    cfg.validate();
    const int frames = num_frames(w.samples.size(), cfg);
    const size_t nfft = next_pow2(static_cast<size_t>(cfg.frame_len_samples));
    const int n_bins = static_cast<int>(nfft / 2) + 1;
    const double bin_hz = static_cast<double>(w.sample_rate_hz) / static_cast<double>(nfft);

    // Hann taper.
    std::vector<double> window(cfg.frame_len_samples);
    for (int i = 0; i < cfg.frame_len_samples; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 * i / (cfg.frame_len_samples - 1));
    }

    // Triangular filterbank as (bin, weight) lists per band.
    const auto edges = filter_edges(cfg, w.sample_rate_hz);
    std::vector<std::vector<std::pair<int, double>>> bank(cfg.n_bands);
    for (int b = 0; b < cfg.n_bands; ++b) {
        const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = k * bin_hz;
            double wgt = 0.0;
            if (f > lo && f < mid) wgt = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi) wgt = (hi - f) / (hi - mid);
            if (wgt > 0.0) bank[b].emplace_back(k, wgt);
        }
    }

    FeatureMatrix out;
    out.frames = frames;
    out.bands = cfg.n_bands;
    out.v.resize(static_cast<size_t>(frames) * cfg.n_bands);

    std::vector<std::complex<double>> buf(nfft);
    std::vector<double> mag(n_bins);
    for (int t = 0; t < frames; ++t) {
        const size_t start = static_cast<size_t>(t) * cfg.hop_samples;
        for (size_t i = 0; i < nfft; ++i) {
            const double s = i < static_cast<size_t>(cfg.frame_len_samples)
                                 ? w.samples[start + i] * window[i]
                                 : 0.0;
            buf[i] = {s, 0.0};
        }
        fft_inplace(buf);
        for (int k = 0; k < n_bins; ++k) mag[k] = std::abs(buf[k]);

        for (int b = 0; b < cfg.n_bands; ++b) {
            double acc = 0.0;
            for (const auto& [k, wgt] : bank[b]) acc += wgt * mag[k];
            out.v[static_cast<size_t>(t) * cfg.n_bands + b] = std::log(std::max(acc, kLogFloor));
        }
    }
    return out;
}

}  // namespace votetok
