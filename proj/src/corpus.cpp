#include "votetok/corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "votetok/noise.hpp"
#include "votetok/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace votetok {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr double kHarmonicCapHz = 5000.0;
constexpr int kMaxHarmonics = 10;
}  // namespace

void CorpusSpec::validate() const {
    if (n_utterances <= 0) throw std::invalid_argument("CorpusSpec: n_utterances must be positive");
    if (alphabet_size < 2) throw std::invalid_argument("CorpusSpec: alphabet_size must be >= 2");
    if (segment_frames <= 0) throw std::invalid_argument("CorpusSpec: segment_frames must be positive");
    if (symbols_per_utterance <= 0) throw std::invalid_argument("CorpusSpec: symbols_per_utterance must be positive");
    if (sample_rate_hz <= 0) throw std::invalid_argument("CorpusSpec: sample_rate_hz must be positive");
}

double symbol_f0_hz(int symbol, int alphabet_size) {
    return 110.0 * std::pow(2.0, 2.0 * symbol / alphabet_size);
}

Utterance render_utterance(const std::vector<int>& symbols, const CorpusSpec& spec,
                           const FeatureConfig& cfg, uint64_t seed, const std::string& id) {
    cfg.validate();
    if (symbols.empty()) throw std::invalid_argument("render_utterance: empty symbol sequence");
    for (int s : symbols) {
        if (s < 0 || s >= spec.alphabet_size)
            throw std::invalid_argument("render_utterance: symbol out of range");
    }

    const int n_segments = static_cast<int>(symbols.size());
    const int total_frames = n_segments * spec.segment_frames;
    const size_t n_samples =
        static_cast<size_t>(cfg.frame_len_samples) + static_cast<size_t>(total_frames - 1) * cfg.hop_samples;
    const size_t seg_samples = static_cast<size_t>(spec.segment_frames) * cfg.hop_samples;
    // Segment boundaries are shifted right so that every frame's center
    // falls inside the segment carrying its label.
    const size_t align = static_cast<size_t>((cfg.frame_len_samples - cfg.hop_samples) / 2);
    const double nyquist = spec.sample_rate_hz / 2.0;
    const double cap_hz = std::min(kHarmonicCapHz, 0.9 * nyquist);

    Rng rng(seed);

    Utterance utt;
    utt.utterance_id = id;
    utt.waveform.sample_rate_hz = spec.sample_rate_hz;
    utt.waveform.samples.assign(n_samples, 0.0);

    for (int seg = 0; seg < n_segments; ++seg) {
        const double f0 = symbol_f0_hz(symbols[seg], spec.alphabet_size);
        const int n_harm = std::min(kMaxHarmonics, static_cast<int>(cap_hz / f0));
        double norm = 0.0;
        for (int k = 1; k <= n_harm; ++k) norm += 1.0 / k;

        const double gain = 0.3 * rng.uniform(0.9, 1.1) / norm;  // mild amplitude jitter
        std::vector<double> phase(n_harm);
        for (int k = 0; k < n_harm; ++k) phase[k] = rng.uniform(0.0, kTwoPi);

        const size_t lo = seg == 0 ? 0 : static_cast<size_t>(seg) * seg_samples + align;
        const size_t hi = seg + 1 == n_segments ? n_samples : (seg + 1) * seg_samples + align;
        for (size_t i = lo; i < hi; ++i) {
            const double t = static_cast<double>(i - lo) / spec.sample_rate_hz;
            double s = 0.0;
            for (int k = 0; k < n_harm; ++k) {
                s += std::sin(kTwoPi * f0 * (k + 1) * t + phase[k]) / (k + 1);
            }
            utt.waveform.samples[i] = gain * s;
        }
    }

    utt.labels.resize(total_frames);
    for (int t = 0; t < total_frames; ++t) utt.labels[t] = symbols[t / spec.segment_frames];
    return utt;
}

std::vector<Utterance> synth_corpus(const CorpusSpec& spec, const FeatureConfig& cfg) {
    spec.validate();
    std::vector<Utterance> corpus;
    corpus.reserve(spec.n_utterances);
    for (int u = 0; u < spec.n_utterances; ++u) {
        Rng sym_rng(derive_seed(spec.seed, "corpus-symbols", static_cast<uint64_t>(u)));
        std::vector<int> symbols(spec.symbols_per_utterance);
        for (auto& s : symbols) s = static_cast<int>(sym_rng.uniform_int(0, spec.alphabet_size - 1));

        char id[16];
        std::snprintf(id, sizeof(id), "u%06d", u);
        corpus.push_back(render_utterance(symbols, spec, cfg,
                                          derive_seed(spec.seed, "corpus-render", static_cast<uint64_t>(u)), id));
    }
    return corpus;
}

void write_corpus(const std::vector<Utterance>& corpus, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "wav");
    std::ofstream manifest(fs::path(dir) / "manifest.jsonl");
    if (!manifest) throw std::runtime_error("write_corpus: cannot write manifest in " + dir);
    for (const auto& utt : corpus) {
        const std::string rel = "wav/" + utt.utterance_id + ".wav";
        save_wav(utt.waveform, (fs::path(dir) / rel).string());
        json line = {{"id", utt.utterance_id}, {"wav_path", rel}, {"labels", utt.labels}};
        manifest << line.dump() << "\n";
    }
}

std::vector<Utterance> load_corpus(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::vector<Utterance> corpus;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        Utterance utt;
        utt.utterance_id = j.at("id").get<std::string>();
        utt.labels = j.at("labels").get<std::vector<int>>();
        utt.waveform = load_wav((base / j.at("wav_path").get<std::string>()).string());
        corpus.push_back(std::move(utt));
    }
    return corpus;
}

void synth_noise_pool(const std::string& dir, int n_clips, uint64_t seed,
                      NoisePoolFlavor flavor, int sample_rate_hz) {
    if (n_clips <= 0) throw std::invalid_argument("synth_noise_pool: n_clips must be positive");
    fs::create_directories(dir);

    for (int c = 0; c < n_clips; ++c) {
        Rng rng(derive_seed(seed, "noise-pool", static_cast<uint64_t>(c)));
        const double dur = rng.uniform(1.0, 2.5);
        const size_t n = static_cast<size_t>(dur * sample_rate_hz);
        std::vector<double> x(n, 0.0);

        if (flavor == NoisePoolFlavor::kAmbient) {
            // Colored noise bed plus an optional slow AM tone.
            const double alpha = rng.uniform(0.0, 2.0);
            const Waveform bed = gen_colored_noise(static_cast<int>(n), alpha, rng.next_u64(), sample_rate_hz);
            for (size_t i = 0; i < n; ++i) x[i] = bed.samples[i];
            if (rng.uniform() < 0.5) {
                const double f = rng.uniform(300.0, 3000.0);
                const double am = rng.uniform(2.0, 8.0);
                const double ph = rng.uniform(0.0, kTwoPi);
                for (size_t i = 0; i < n; ++i) {
                    const double t = static_cast<double>(i) / sample_rate_hz;
                    x[i] += 0.7 * (0.5 + 0.5 * std::sin(kTwoPi * am * t)) * std::sin(kTwoPi * f * t + ph);
                }
            }
        } else {
            // Click trains and frequency sweeps; disjoint from the ambient family.
            const double rate = rng.uniform(3.0, 12.0);  // clicks per second
            size_t next = static_cast<size_t>(rng.uniform(0.0, sample_rate_hz / rate));
            while (next < n) {
                const double amp = rng.uniform(0.4, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
                const double decay = rng.uniform(200.0, 900.0);
                for (size_t i = next; i < std::min(n, next + static_cast<size_t>(0.05 * sample_rate_hz)); ++i) {
                    const double t = static_cast<double>(i - next) / sample_rate_hz;
                    x[i] += amp * std::exp(-decay * t);
                }
                next += static_cast<size_t>(sample_rate_hz / rate * rng.uniform(0.6, 1.4));
            }
            const double f_start = rng.uniform(200.0, 1500.0);
            const double f_end = rng.uniform(1500.0, 6000.0);
            for (size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(i) / sample_rate_hz;
                const double f = f_start + (f_end - f_start) * t / dur;
                x[i] += 0.3 * std::sin(kTwoPi * f * t);
            }
        }

        // Normalize to a fixed RMS so every clip carries usable power.
        double power = 0.0;
        for (double s : x) power += s * s;
        power /= static_cast<double>(n);
        const double g = power > 0.0 ? 0.15 / std::sqrt(power) : 1.0;
        Waveform clip;
        clip.sample_rate_hz = sample_rate_hz;
        clip.samples.resize(n);
        for (size_t i = 0; i < n; ++i) clip.samples[i] = std::clamp(g * x[i], -1.0, 1.0);

        char name[24];
        std::snprintf(name, sizeof(name), "clip%04d.wav", c);
        save_wav(clip, (fs::path(dir) / name).string());
    }
}

}  // namespace votetok
