#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "votetok/rng.hpp"
#include "votetok/wav.hpp"

namespace votetok {

enum class PerturbationKind { kGaussian, kPink, kBrown, kBitCrush, kRealNoise };

const char* to_string(PerturbationKind kind);
PerturbationKind perturbation_kind_from_string(const std::string& s);

// One perturbation family with an intensity value or inclusive range:
// SNR in dB for the noise kinds, bit depth for kBitCrush. kRealNoise draws
// clips from a directory of WAV files.
struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::kGaussian;
    double intensity_lo = 0.0;
    double intensity_hi = 0.0;
    std::string noise_pool;  // kRealNoise only

    static PerturbationSpec fixed(PerturbationKind kind, double intensity, std::string pool = "");
    static PerturbationSpec range(PerturbationKind kind, double lo, double hi, std::string pool = "");
    void validate() const;
};

// Record of one realized draw; enough to replay the exact output.
struct AppliedPerturbation {
    PerturbationKind kind;
    double realized_intensity = 0.0;
    std::string noise_clip_id;       // kRealNoise only
    uint64_t clip_offset = 0;        // crop offset into the clip, samples
    uint64_t draw_seed = 0;          // sub-seed used for generated noise
};

// In-memory noise clip directory; clip id = file name relative to the pool.
class NoisePool {
public:
    explicit NoisePool(const std::string& dir);
    size_t size() const { return clips_.size(); }
    const Waveform& clip(size_t i) const { return clips_[i]; }
    const std::string& clip_id(size_t i) const { return ids_[i]; }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::vector<Waveform> clips_;
    std::vector<std::string> ids_;
};

using NoisePoolMap = std::map<std::string, NoisePool>;

// Loads every distinct pool directory referenced by the specs.
NoisePoolMap load_noise_pools(const std::vector<PerturbationSpec>& specs);

// Mean squared sample.
double measure_power(const Waveform& w);

// clean + g * noise with g chosen so the mixed segment hits snr_db exactly.
// The noise is tiled or cropped to the clean length first; the crop offset
// is rng-drawn unless fixed_offset is given.
Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db);

// 1/f^alpha noise via spectral synthesis: white Gaussian spectrum scaled by
// f^(-alpha/2), DC zeroed, inverse transform, unit power. alpha 0 = white,
// 1 = pink, 2 = brown.
Waveform gen_colored_noise(int n_samples, double alpha, uint64_t seed, int sample_rate_hz = 16000);

// Requantizes samples to the given bit depth: q = 2^(depth-1),
// y = clamp(round(x*q), -q, q-1) / q.
Waveform bit_crush(const Waveform& w, int depth);

// Picks one spec uniformly, samples its intensity (integer-uniform for bit
// depth), applies it. Output always has the input's length and rate.
std::pair<Waveform, AppliedPerturbation> perturb(const Waveform& w,
                                                 const std::vector<PerturbationSpec>& specs,
                                                 Rng& rng, const NoisePoolMap& pools);

// Replays a recorded draw against the same clean input.
Waveform apply_recorded(const Waveform& w, const AppliedPerturbation& applied,
                        const NoisePoolMap& pools);

// Training-time intensity ranges: Gaussian SNR 16-30, pink 16-24,
// brown 12-24, bit depth 8-14, real-world SNR 12-24.
std::vector<PerturbationSpec> default_training_specs(const std::string& pool_dir);

// Fixed evaluation intensities: Gaussian 25, pink 22, brown 16, bit depth
// 10, real 16, out-of-domain real 16.
struct EvalCase {
    std::string name;
    PerturbationSpec spec;
};
std::vector<EvalCase> default_eval_suite(const std::string& pool_dir, const std::string& ood_pool_dir);

}  // namespace votetok
