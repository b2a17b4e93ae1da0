#pragma once

#include <string>
#include <vector>

namespace votetok {

// Mono waveform, samples in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = 16000;

    size_t size() const { return samples.size(); }
    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate_hz;
    }
};

// Reads a RIFF/WAVE file. Only 16-bit PCM mono is accepted; anything else
// (float, multi-channel, compressed) is rejected rather than downmixed.
// Samples are scaled by 1/32768.
Waveform load_wav(const std::string& path);

// Writes 16-bit PCM mono. Samples outside [-1, 1] are clamped before
// quantization, so load(save(w)) matches w within one PCM step.
void save_wav(const Waveform& w, const std::string& path);

}  // namespace votetok
