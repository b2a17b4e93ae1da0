#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "votetok/features.hpp"
#include "votetok/wav.hpp"

namespace votetok {

struct CorpusSpec {
    int n_utterances = 0;
    int alphabet_size = 16;       // V
    int segment_frames = 6;       // frames per symbol
    int symbols_per_utterance = 6;
    uint64_t seed = 1;
    int sample_rate_hz = 16000;

    void validate() const;
};

// Labeled utterance: one symbol id per feature frame.
struct Utterance {
    Waveform waveform;
    std::vector<int> labels;
    std::string utterance_id;
};

// Fundamental of symbol s: 110 * 2^(2s/V) Hz.
double symbol_f0_hz(int symbol, int alphabet_size);

// Renders one utterance for a fixed symbol sequence. Each symbol becomes a
// band-limited harmonic tone segment with per-segment amplitude jitter and
// random harmonic phases; labels repeat each symbol for segment_frames
// frames and line up with extract_features framing under cfg.
Utterance render_utterance(const std::vector<int>& symbols, const CorpusSpec& spec,
                           const FeatureConfig& cfg, uint64_t seed, const std::string& id);

// Pure function of (spec, cfg): same seed, same corpus.
std::vector<Utterance> synth_corpus(const CorpusSpec& spec, const FeatureConfig& cfg);

// Manifest format: JSONL, one {"id", "wav_path", "labels"} object per line.
// WAVs are written next to the manifest under <dir>/wav/.
void write_corpus(const std::vector<Utterance>& corpus, const std::string& dir);
std::vector<Utterance> load_corpus(const std::string& manifest_path);

// Synthetic stand-ins for real-world noise clips: a directory of short WAV
// files with mixed character (colored noise, AM tones, clicks). `flavor`
// selects between two disjoint generator families so a held-out pool is
// genuinely out of domain.
enum class NoisePoolFlavor { kAmbient, kEvents };
void synth_noise_pool(const std::string& dir, int n_clips, uint64_t seed,
                      NoisePoolFlavor flavor, int sample_rate_hz = 16000);

}  // namespace votetok
