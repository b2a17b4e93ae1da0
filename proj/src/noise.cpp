#include "votetok/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <stdexcept>

#include "votetok/fft.hpp"

namespace fs = std::filesystem;

namespace votetok {

const char* to_string(PerturbationKind kind) {
    switch (kind) {
        case PerturbationKind::kGaussian: return "gaussian";
        case PerturbationKind::kPink: return "pink";
        case PerturbationKind::kBrown: return "brown";
        case PerturbationKind::kBitCrush: return "bitcrush";
        case PerturbationKind::kRealNoise: return "real";
    }
    return "?";
}

PerturbationKind perturbation_kind_from_string(const std::string& s) {
    if (s == "gaussian") return PerturbationKind::kGaussian;
    if (s == "pink") return PerturbationKind::kPink;
    if (s == "brown") return PerturbationKind::kBrown;
    if (s == "bitcrush") return PerturbationKind::kBitCrush;
    if (s == "real") return PerturbationKind::kRealNoise;
    throw std::invalid_argument("unknown perturbation kind: " + s);
}

PerturbationSpec PerturbationSpec::fixed(PerturbationKind kind, double intensity, std::string pool) {
    PerturbationSpec s{kind, intensity, intensity, std::move(pool)};
    s.validate();
    return s;
}

PerturbationSpec PerturbationSpec::range(PerturbationKind kind, double lo, double hi, std::string pool) {
    PerturbationSpec s{kind, lo, hi, std::move(pool)};
    s.validate();
    return s;
}

void PerturbationSpec::validate() const {
    if (intensity_lo > intensity_hi)
        throw std::invalid_argument("PerturbationSpec: intensity range low > high");
    if (kind == PerturbationKind::kBitCrush) {
        if (intensity_lo < 1.0 || intensity_hi > 16.0)
            throw std::invalid_argument("PerturbationSpec: bit depth must be in [1, 16]");
    }
    if (kind == PerturbationKind::kRealNoise && noise_pool.empty())
        throw std::invalid_argument("PerturbationSpec: real noise requires a noise_pool directory");
}

NoisePool::NoisePool(const std::string& dir) : dir_(dir) {
    if (!fs::is_directory(dir)) throw std::runtime_error("NoisePool: not a directory: " + dir);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".wav")
            names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());  // directory order is not deterministic
    for (const auto& name : names) {
        clips_.push_back(load_wav((fs::path(dir) / name).string()));
        ids_.push_back(name);
    }
    if (clips_.empty()) throw std::runtime_error("NoisePool: no .wav clips in " + dir);
}

NoisePoolMap load_noise_pools(const std::vector<PerturbationSpec>& specs) {
    NoisePoolMap pools;
    for (const auto& spec : specs) {
        if (spec.kind == PerturbationKind::kRealNoise && !pools.count(spec.noise_pool))
            pools.emplace(spec.noise_pool, NoisePool(spec.noise_pool));
    }
    return pools;
}

double measure_power(const Waveform& w) {
    if (w.samples.empty()) throw std::invalid_argument("measure_power: empty waveform");
    double acc = 0.0;
    for (double s : w.samples) acc += s * s;
    return acc / static_cast<double>(w.samples.size());
}

namespace {

// Tiles a shorter clip (wrapping from `offset`) or crops a longer one.
std::vector<double> fit_to_length(const std::vector<double>& clip, size_t len, size_t offset) {
    std::vector<double> out(len);
    const size_t n = clip.size();
    for (size_t i = 0; i < len; ++i) out[i] = clip[(offset + i) % n];
    return out;
}

Waveform mix_span(const Waveform& clean, const std::vector<double>& noise, double snr_db) {
    double p_clean = measure_power(clean);
    double p_noise = 0.0;
    for (double s : noise) p_noise += s * s;
    p_noise /= static_cast<double>(noise.size());
    if (p_clean <= 0.0) throw std::invalid_argument("mix_at_snr: clean signal has zero power");
    if (p_noise <= 0.0) throw std::invalid_argument("mix_at_snr: noise has zero power");

    const double g = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    Waveform out;
    out.sample_rate_hz = clean.sample_rate_hz;
    out.samples.resize(clean.samples.size());
    for (size_t i = 0; i < clean.samples.size(); ++i)
        out.samples[i] = clean.samples[i] + g * noise[i];
    return out;
}

}  // namespace

Waveform mix_at_snr(const Waveform& clean, const Waveform& noise, double snr_db) {
    if (clean.sample_rate_hz != noise.sample_rate_hz)
        throw std::invalid_argument("mix_at_snr: sample rate mismatch");
    if (noise.samples.empty()) throw std::invalid_argument("mix_at_snr: empty noise");
    return mix_span(clean, fit_to_length(noise.samples, clean.samples.size(), 0), snr_db);
}

Waveform gen_colored_noise(int n_samples, double alpha, uint64_t seed, int sample_rate_hz) {
    if (n_samples < 2) throw std::invalid_argument("gen_colored_noise: need at least 2 samples");
    if (alpha < 0.0 || alpha > 2.0) throw std::invalid_argument("gen_colored_noise: alpha must be in [0, 2]");

    const size_t n_fft = next_pow2(static_cast<size_t>(n_samples));
    std::vector<std::complex<double>> spec(n_fft, {0.0, 0.0});
    Rng rng(seed);

    // Hermitian spectrum with f^(-alpha/2) shaping; DC is zeroed.
    for (size_t k = 1; k < n_fft / 2; ++k) {
        const double scale = std::pow(static_cast<double>(k), -alpha / 2.0);
        const std::complex<double> x(rng.normal(), rng.normal());
        spec[k] = scale * x;
        spec[n_fft - k] = std::conj(spec[k]);
    }
    spec[n_fft / 2] = std::pow(static_cast<double>(n_fft / 2), -alpha / 2.0) * rng.normal();

    fft_inplace(spec, /*inverse=*/true);

    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n_samples);
    double power = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        w.samples[i] = spec[i].real();
        power += w.samples[i] * w.samples[i];
    }
    power /= n_samples;
    const double g = 1.0 / std::sqrt(power);
    for (auto& s : w.samples) s *= g;
    return w;
}

Waveform bit_crush(const Waveform& w, int depth) {
    if (depth < 1 || depth > 16) throw std::invalid_argument("bit_crush: depth must be in [1, 16]");
    const double q = std::pow(2.0, depth - 1);
    Waveform out;
    out.sample_rate_hz = w.sample_rate_hz;
    out.samples.resize(w.samples.size());
    for (size_t i = 0; i < w.samples.size(); ++i) {
        double v = std::round(w.samples[i] * q);
        v = std::clamp(v, -q, q - 1.0);
        out.samples[i] = v / q;
    }
    return out;
}

namespace {

Waveform apply_draw(const Waveform& w, PerturbationKind kind, double intensity,
                    const NoisePool* pool, size_t clip_idx, size_t clip_offset, uint64_t seed) {
    const size_t n = w.samples.size();
    switch (kind) {
        case PerturbationKind::kGaussian: {
            Rng nrng(seed);
            std::vector<double> noise(n);
            for (auto& s : noise) s = nrng.normal();
            return mix_span(w, noise, intensity);
        }
        case PerturbationKind::kPink:
        case PerturbationKind::kBrown: {
            const double alpha = kind == PerturbationKind::kPink ? 1.0 : 2.0;
            const Waveform noise = gen_colored_noise(static_cast<int>(n), alpha, seed, w.sample_rate_hz);
            return mix_span(w, noise.samples, intensity);
        }
        case PerturbationKind::kBitCrush:
            return bit_crush(w, static_cast<int>(intensity));
        case PerturbationKind::kRealNoise: {
            const Waveform& clip = pool->clip(clip_idx);
            if (clip.sample_rate_hz != w.sample_rate_hz)
                throw std::runtime_error("perturb: noise clip sample rate mismatch: " + pool->clip_id(clip_idx));
            return mix_span(w, fit_to_length(clip.samples, n, clip_offset), intensity);
        }
    }
    throw std::logic_error("perturb: unreachable");
}

}  // namespace

std::pair<Waveform, AppliedPerturbation> perturb(const Waveform& w,
                                                 const std::vector<PerturbationSpec>& specs,
                                                 Rng& rng, const NoisePoolMap& pools) {
    if (specs.empty()) throw std::invalid_argument("perturb: empty spec set");
    if (w.samples.empty()) throw std::invalid_argument("perturb: empty waveform");

    const auto& spec = specs[rng.uniform_int(0, static_cast<int64_t>(specs.size()) - 1)];
    spec.validate();

    AppliedPerturbation applied;
    applied.kind = spec.kind;
    if (spec.kind == PerturbationKind::kBitCrush) {
        applied.realized_intensity = static_cast<double>(
            rng.uniform_int(static_cast<int64_t>(spec.intensity_lo), static_cast<int64_t>(spec.intensity_hi)));
    } else {
        applied.realized_intensity = rng.uniform(spec.intensity_lo, spec.intensity_hi);
    }

    const NoisePool* pool = nullptr;
    size_t clip_idx = 0;
    if (spec.kind == PerturbationKind::kRealNoise) {
        auto it = pools.find(spec.noise_pool);
        if (it == pools.end()) throw std::runtime_error("perturb: noise pool not loaded: " + spec.noise_pool);
        pool = &it->second;
        clip_idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool->size()) - 1));
        applied.noise_clip_id = pool->clip_id(clip_idx);
        const size_t clip_len = pool->clip(clip_idx).samples.size();
        if (clip_len > w.samples.size())
            applied.clip_offset = static_cast<uint64_t>(
                rng.uniform_int(0, static_cast<int64_t>(clip_len - w.samples.size())));
    } else {
        applied.draw_seed = rng.next_u64();
    }

    Waveform out = apply_draw(w, spec.kind, applied.realized_intensity, pool, clip_idx,
                              applied.clip_offset, applied.draw_seed);
    return {std::move(out), applied};
}

Waveform apply_recorded(const Waveform& w, const AppliedPerturbation& applied,
                        const NoisePoolMap& pools) {
    const NoisePool* pool = nullptr;
    size_t clip_idx = 0;
    if (applied.kind == PerturbationKind::kRealNoise) {
        for (const auto& [dir, p] : pools) {
            (void)dir;
            for (size_t i = 0; i < p.size(); ++i) {
                if (p.clip_id(i) == applied.noise_clip_id) {
                    pool = &p;
                    clip_idx = i;
                    break;
                }
            }
            if (pool) break;
        }
        if (!pool) throw std::runtime_error("apply_recorded: clip not found: " + applied.noise_clip_id);
    }
    return apply_draw(w, applied.kind, applied.realized_intensity, pool, clip_idx,
                      applied.clip_offset, applied.draw_seed);
}

std::vector<PerturbationSpec> default_training_specs(const std::string& pool_dir) {
    std::vector<PerturbationSpec> specs = {
        PerturbationSpec::range(PerturbationKind::kGaussian, 16.0, 30.0),
        PerturbationSpec::range(PerturbationKind::kPink, 16.0, 24.0),
        PerturbationSpec::range(PerturbationKind::kBrown, 12.0, 24.0),
        PerturbationSpec::range(PerturbationKind::kBitCrush, 8.0, 14.0),
    };
    if (!pool_dir.empty())
        specs.push_back(PerturbationSpec::range(PerturbationKind::kRealNoise, 12.0, 24.0, pool_dir));
    return specs;
}

std::vector<EvalCase> default_eval_suite(const std::string& pool_dir, const std::string& ood_pool_dir) {
    std::vector<EvalCase> suite = {
        {"gaussian", PerturbationSpec::fixed(PerturbationKind::kGaussian, 25.0)},
        {"pink", PerturbationSpec::fixed(PerturbationKind::kPink, 22.0)},
        {"brown", PerturbationSpec::fixed(PerturbationKind::kBrown, 16.0)},
        {"bitcrush", PerturbationSpec::fixed(PerturbationKind::kBitCrush, 10.0)},
    };
    if (!pool_dir.empty())
        suite.push_back({"real", PerturbationSpec::fixed(PerturbationKind::kRealNoise, 16.0, pool_dir)});
    if (!ood_pool_dir.empty())
        suite.push_back({"real_ood", PerturbationSpec::fixed(PerturbationKind::kRealNoise, 16.0, ood_pool_dir)});
    return suite;
}

}  // namespace votetok
