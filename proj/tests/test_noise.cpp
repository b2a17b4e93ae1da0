#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <filesystem>

#include "votetok/corpus.hpp"
#include "votetok/noise.hpp"

using namespace votetok;
namespace fs = std::filesystem;

namespace {

Waveform unit_sine(size_t n, double freq = 440.0, int rate = 16000) {
    Waveform w;
    w.sample_rate_hz = rate;
    w.samples.resize(n);
    for (size_t i = 0; i < n; ++i)
        w.samples[i] = std::sin(2.0 * 3.14159265358979323846 * freq * i / rate);
    return w;
}

double snr_db_of(const Waveform& clean, const Waveform& mixed) {
    Waveform residual;
    residual.samples.resize(clean.samples.size());
    for (size_t i = 0; i < clean.samples.size(); ++i)
        residual.samples[i] = mixed.samples[i] - clean.samples[i];
    return 10.0 * std::log10(measure_power(clean) / measure_power(residual));
}

}  // namespace

TEST_CASE("measure_power closed forms") {
    Waveform zeros;
    zeros.samples.assign(100, 0.0);
    CHECK(measure_power(zeros) == 0.0);

    // One full period of a unit sine: power 1/2.
    const Waveform sine = unit_sine(16000, 100.0);  // 100 periods over 1 s
    CHECK(measure_power(sine) == doctest::Approx(0.5).epsilon(1e-9));

    Waveform constant;
    constant.samples.assign(64, 0.25);
    CHECK(measure_power(constant) == doctest::Approx(0.0625));

    Waveform empty;
    CHECK_THROWS_AS(measure_power(empty), std::invalid_argument);
}

TEST_CASE("mix_at_snr hits the target exactly") {
    const Waveform clean = unit_sine(8000);

    SUBCASE("0 dB means equal powers") {
        const Waveform noise = gen_colored_noise(8000, 0.0, 77);
        const Waveform mixed = mix_at_snr(clean, noise, 0.0);
        CHECK(snr_db_of(clean, mixed) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("gain formula: P_clean=0.5, P_noise=1, 20 dB -> g ~ 0.070711") {
        Waveform noise = gen_colored_noise(8000, 0.0, 78);  // unit power by construction
        const Waveform mixed = mix_at_snr(clean, noise, 20.0);
        // Recover g from one sample: mixed - clean = g * noise.
        const double g = (mixed.samples[5] - clean.samples[5]) / noise.samples[5];
        CHECK(g == doctest::Approx(std::sqrt(0.005)).epsilon(1e-6));
    }
    SUBCASE("very high SNR approaches the clean signal") {
        const Waveform noise = gen_colored_noise(8000, 0.0, 79);
        const Waveform mixed = mix_at_snr(clean, noise, 300.0);
        for (size_t i = 0; i < clean.samples.size(); ++i)
            CHECK(std::abs(mixed.samples[i] - clean.samples[i]) < 1e-12);
    }
    SUBCASE("zero-power inputs are rejected") {
        Waveform silent;
        silent.samples.assign(8000, 0.0);
        const Waveform noise = gen_colored_noise(8000, 0.0, 80);
        CHECK_THROWS_AS(mix_at_snr(silent, noise, 10.0), std::invalid_argument);
        CHECK_THROWS_AS(mix_at_snr(clean, silent, 10.0), std::invalid_argument);
    }
}

TEST_CASE("white noise is uncorrelated at lag 1") {
    const int n = 1 << 14;
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        const Waveform w = gen_colored_noise(n, 0.0, seed);
        double lag1 = 0.0;
        for (int i = 0; i + 1 < n; ++i) lag1 += w.samples[i] * w.samples[i + 1];
        lag1 /= n;  // unit power, so this is the lag-1 autocorrelation
        CHECK(std::abs(lag1) < 4.0 / std::sqrt(static_cast<double>(n)));
    }
}

TEST_CASE("colored noise is unit power and deterministic") {
    const Waveform a = gen_colored_noise(10000, 1.0, 42);
    const Waveform b = gen_colored_noise(10000, 1.0, 42);
    CHECK(a.samples == b.samples);
    CHECK(measure_power(a) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(gen_colored_noise(1, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(gen_colored_noise(100, 3.0, 1), std::invalid_argument);
}

TEST_CASE("bit_crush formula") {
    SUBCASE("depth 16 is a near-identity") {
        const Waveform w = unit_sine(1000);
        const Waveform y = bit_crush(w, 16);
        for (size_t i = 0; i < w.samples.size(); ++i)
            CHECK(std::abs(y.samples[i] - w.samples[i]) <= std::pow(2.0, -15.0));
    }
    SUBCASE("x=0.3 at depth 2 quantizes to 0.5") {
        Waveform w;
        w.samples = {0.3};
        CHECK(bit_crush(w, 2).samples[0] == doctest::Approx(0.5));
    }
    SUBCASE("-1 is exactly representable at any depth") {
        Waveform w;
        w.samples = {-1.0};
        for (int depth = 1; depth <= 16; ++depth) CHECK(bit_crush(w, depth).samples[0] == -1.0);
    }
    SUBCASE("depth bounds") {
        Waveform w;
        w.samples = {0.0};
        CHECK_THROWS_AS(bit_crush(w, 0), std::invalid_argument);
        CHECK_THROWS_AS(bit_crush(w, 17), std::invalid_argument);
    }
}

TEST_CASE("perturb: fixed gaussian spec hits 25 dB within 0.1") {
    const Waveform clean = unit_sine(9000);
    const std::vector<PerturbationSpec> specs = {
        PerturbationSpec::fixed(PerturbationKind::kGaussian, 25.0)};
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto [out, applied] = perturb(clean, specs, rng, {});
        CHECK(applied.realized_intensity == 25.0);
        CHECK(std::abs(snr_db_of(clean, out) - 25.0) < 0.1);
    }
}

TEST_CASE("perturb: singleton bitcrush delegates exactly") {
    const Waveform clean = unit_sine(5000);
    const std::vector<PerturbationSpec> specs = {
        PerturbationSpec::fixed(PerturbationKind::kBitCrush, 10.0)};
    Rng rng(2);
    const auto [out, applied] = perturb(clean, specs, rng, {});
    CHECK(applied.realized_intensity == 10.0);
    CHECK(out.samples == bit_crush(clean, 10).samples);
}

TEST_CASE("perturb is deterministic per rng seed and replayable") {
    const std::string pool_dir = (fs::temp_directory_path() / "votetok_test_perturb_pool").string();
    fs::remove_all(pool_dir);
    synth_noise_pool(pool_dir, 3, 11, NoisePoolFlavor::kAmbient);
    const auto specs = default_training_specs(pool_dir);
    const NoisePoolMap pools = load_noise_pools(specs);
    const Waveform clean = unit_sine(7000);

    for (int trial = 0; trial < 10; ++trial) {
        Rng a(100 + trial), b(100 + trial);
        const auto [out_a, applied_a] = perturb(clean, specs, a, pools);
        const auto [out_b, applied_b] = perturb(clean, specs, b, pools);
        CHECK(out_a.samples == out_b.samples);
        CHECK(applied_a.realized_intensity == applied_b.realized_intensity);
        CHECK(applied_a.kind == applied_b.kind);

        const Waveform replayed = apply_recorded(clean, applied_a, pools);
        CHECK(replayed.samples == out_a.samples);
    }
    fs::remove_all(pool_dir);
}

TEST_CASE("perturb preserves length and rate for every kind") {
    const std::string pool_dir = (fs::temp_directory_path() / "votetok_test_len_pool").string();
    fs::remove_all(pool_dir);
    synth_noise_pool(pool_dir, 2, 13, NoisePoolFlavor::kEvents);
    const Waveform clean = unit_sine(6543);  // longer and shorter than pool clips

    const auto specs = default_training_specs(pool_dir);
    const NoisePoolMap pools = load_noise_pools(specs);
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto [out, applied] = perturb(clean, specs, rng, pools);
        (void)applied;
        CHECK(out.samples.size() == clean.samples.size());
        CHECK(out.sample_rate_hz == clean.sample_rate_hz);
    }
    fs::remove_all(pool_dir);
}

TEST_CASE("measured SNR matches the realized intensity for noise kinds") {
    const std::string pool_dir = (fs::temp_directory_path() / "votetok_test_snr_pool").string();
    fs::remove_all(pool_dir);
    synth_noise_pool(pool_dir, 3, 17, NoisePoolFlavor::kAmbient);
    const auto specs = default_training_specs(pool_dir);
    const NoisePoolMap pools = load_noise_pools(specs);
    const Waveform clean = unit_sine(8000);

    Rng rng(6);
    int checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto [out, applied] = perturb(clean, specs, rng, pools);
        if (applied.kind == PerturbationKind::kBitCrush) continue;
        CHECK(std::abs(snr_db_of(clean, out) - applied.realized_intensity) < 0.1);
        ++checked;
    }
    CHECK(checked > 100);
    fs::remove_all(pool_dir);
}

TEST_CASE("real-noise intensity range matches the training table") {
    const auto specs = default_training_specs("");
    REQUIRE(specs.size() == 4);  // no pool directory, no real-noise family
    CHECK(specs[0].kind == PerturbationKind::kGaussian);
    CHECK(specs[0].intensity_lo == 16.0);
    CHECK(specs[0].intensity_hi == 30.0);
    CHECK(specs[1].intensity_lo == 16.0);
    CHECK(specs[1].intensity_hi == 24.0);
    CHECK(specs[2].intensity_lo == 12.0);
    CHECK(specs[2].intensity_hi == 24.0);
    CHECK(specs[3].intensity_lo == 8.0);
    CHECK(specs[3].intensity_hi == 14.0);

    const auto suite = default_eval_suite("", "");
    REQUIRE(suite.size() == 4);
    CHECK(suite[0].spec.intensity_lo == 25.0);  // gaussian
    CHECK(suite[1].spec.intensity_lo == 22.0);  // pink
    CHECK(suite[2].spec.intensity_lo == 16.0);  // brown
    CHECK(suite[3].spec.intensity_lo == 10.0);  // bit depth
}
