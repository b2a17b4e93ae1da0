#pragma once

#include <vector>

#include "votetok/wav.hpp"

namespace votetok {

// Frame-level front end: Hann-tapered frames, magnitude FFT, triangular
// filterbank with log-spaced center frequencies, log compression.
struct FeatureConfig {
    int frame_len_samples = 400;
    int hop_samples = 160;
    int n_bands = 20;
    // Fixed taper; only the Hann window is supported.

    void validate() const;
};

struct FeatureMatrix {
    int frames = 0;
    int bands = 0;
    std::vector<double> v;  // row-major [frames x bands]

    double at(int f, int b) const { return v[static_cast<size_t>(f) * bands + b]; }
    const double* row(int f) const { return v.data() + static_cast<size_t>(f) * bands; }
};

// 1 + floor((len - frame_len) / hop); requires len >= frame_len.
int num_frames(size_t n_samples, const FeatureConfig& cfg);

// Center frequency of band b (the peak of its triangular filter), in Hz.
double band_center_hz(int band, const FeatureConfig& cfg, int sample_rate_hz);

// Log magnitude of the filterbank response per frame. The log floor is
// 1e-8 so silence stays finite.
FeatureMatrix extract_features(const Waveform& w, const FeatureConfig& cfg);

}  // namespace votetok
