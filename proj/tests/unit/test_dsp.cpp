#include "csvq/dsp.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace csvq;
using dsp::Waveform;

namespace {
Waveform noise_clip(int64_t n, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-0.9f, 0.9f);
    Waveform w;
    w.samples.resize(static_cast<size_t>(n));
    for (auto& s : w.samples) s = u(rng);
    return w;
}

double interior_snr_db(const std::vector<float>& ref, const std::vector<float>& deg) {
    double num = 0, den = 0;
    for (size_t i = dsp::kWinLen; i + dsp::kWinLen < ref.size(); ++i) {
        double r = ref[i];
        double e = static_cast<double>(deg[i]) - r;
        num += r * r;
        den += e * e;
    }
    return 10.0 * std::log10(num / std::max(den, 1e-300));
}
}  // namespace

TEST_CASE("stft framing arithmetic", "[dsp]") {
    auto zero = Waveform{std::vector<float>(16000, 0.0f), 16000};
    auto spec = dsp::analyze_stft(zero);
    REQUIRE(spec.frames() == 197);
    REQUIRE(spec.bins() == 161);
    for (int64_t i = 0; i < spec.values.size(); ++i) REQUIRE(spec.values[i] == 0.0f);

    auto ten_s = noise_clip(160000, 1);
    REQUIRE(dsp::analyze_stft(ten_s).frames() == 1997);

    Waveform tiny{std::vector<float>(300, 0.0f), 16000};
    REQUIRE_THROWS_AS(dsp::analyze_stft(tiny), Error);
}

TEST_CASE("impulse energy is confined to the frames that cover it", "[dsp]") {
    Waveform w{std::vector<float>(16000, 0.0f), 16000};
    w.samples[0] = 1.0f;
    auto spec = dsp::analyze_stft(w);
    for (int t = 1; t < spec.frames(); ++t)
        for (int f = 0; f < spec.bins(); ++f) {
            REQUIRE(spec.values.at(t, f, 0) == 0.0f);
            REQUIRE(spec.values.at(t, f, 1) == 0.0f);
        }
}

TEST_CASE("stft analysis is causal in the hop grid", "[dsp]") {
    auto a = noise_clip(16000, 2);
    auto b = a;
    for (size_t i = 8000; i < b.samples.size(); ++i) b.samples[i] += 0.25f;
    auto sa = dsp::analyze_stft(a), sb = dsp::analyze_stft(b);
    // frame t sees samples < 320 + 80 t; frames fully before sample 8000 match exactly
    int unaffected = (8000 - dsp::kWinLen) / dsp::kHop;  // frames 0..unaffected inclusive
    for (int t = 0; t <= unaffected; ++t)
        for (int f = 0; f < 161; ++f) {
            REQUIRE(sa.values.at(t, f, 0) == sb.values.at(t, f, 0));
            REQUIRE(sa.values.at(t, f, 1) == sb.values.at(t, f, 1));
        }
}

TEST_CASE("istft round trip reaches >= 50 dB interior snr", "[dsp]") {
    for (uint64_t seed : {3u, 4u, 5u}) {
        auto w = noise_clip(16000, seed);
        auto back = dsp::synthesize_istft(dsp::analyze_stft(w));
        REQUIRE(back.samples.size() == w.samples.size());
        REQUIRE(interior_snr_db(w.samples, back.samples) >= 50.0);
    }
}

TEST_CASE("istft of a zero spectrum is zero and istft projects", "[dsp]") {
    dsp::ComplexSpectrum zero;
    zero.values = TensorF({24, 161, 2});
    auto w = dsp::synthesize_istft(zero);
    for (float s : w.samples) REQUIRE(s == 0.0f);

    // random inconsistent spectrum: reanalysis of the synthesis is a fixed
    // point of istft∘stft (projection), but differs from the input
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    dsp::ComplexSpectrum s;
    s.values = TensorF({24, 161, 2});
    for (int64_t i = 0; i < s.values.size(); ++i) s.values[i] = u(rng);
    auto wave = dsp::synthesize_istft(s);
    REQUIRE(wave.samples.size() == static_cast<size_t>(23 * 80 + 320));
    for (float v : wave.samples) REQUIRE(std::isfinite(v));

    auto proj = dsp::analyze_stft(wave);
    double diff = 0;
    for (int64_t i = 0; i < s.values.size(); ++i) diff += std::abs(proj.values[i] - s.values[i]);
    REQUIRE(diff > 1.0);  // generally not equal to the inconsistent input

    auto proj2 = dsp::analyze_stft(dsp::synthesize_istft(proj));
    for (int64_t i = 0; i < proj.values.size(); ++i)
        REQUIRE(proj2.values[i] == Catch::Approx(proj.values[i]).margin(2e-4));
}

TEST_CASE("power-law compression", "[dsp]") {
    dsp::ComplexSpectrum s;
    s.values = TensorF({1, 161, 2});
    s.values.at(0, 3, 0) = 16.0f;  // magnitude 16, phase 0
    s.values.at(0, 4, 0) = 0.6f;
    s.values.at(0, 4, 1) = 0.8f;  // magnitude 1, some phase
    auto c = dsp::power_law_compress(s, 0.3f);
    REQUIRE(c.values.at(0, 3, 0) == Catch::Approx(std::pow(16.0, 0.3)).epsilon(1e-5));
    REQUIRE(c.values.at(0, 3, 1) == 0.0f);
    // unit magnitude is a fixed point
    REQUIRE(c.values.at(0, 4, 0) == Catch::Approx(0.6).margin(1e-6));
    REQUIRE(c.values.at(0, 4, 1) == Catch::Approx(0.8).margin(1e-6));
    // zero stays zero
    REQUIRE(c.values.at(0, 0, 0) == 0.0f);

    auto ident = dsp::power_law_compress(s, 1.0f);
    for (int64_t i = 0; i < s.values.size(); ++i) REQUIRE(ident.values[i] == s.values[i]);

    REQUIRE_THROWS_AS(dsp::power_law_compress(s, 1.5f), Error);

    // monotone in magnitude, phase preserved
    dsp::ComplexSpectrum two;
    two.values = TensorF({1, 161, 2});
    two.values.at(0, 5, 0) = 3.0f;
    two.values.at(0, 5, 1) = 4.0f;
    two.values.at(0, 6, 0) = 6.0f;
    two.values.at(0, 6, 1) = 8.0f;
    auto ct = dsp::power_law_compress(two, 0.3f);
    auto mag = [&](int f) {
        return std::hypot(ct.values.at(0, f, 0), ct.values.at(0, f, 1));
    };
    REQUIRE(mag(6) > mag(5));
    REQUIRE(ct.values.at(0, 5, 0) / ct.values.at(0, 5, 1) == Catch::Approx(0.75).epsilon(1e-5));
}

TEST_CASE("mel filterbank rows are nonnegative and cover the band", "[dsp]") {
    for (auto [win, mels] : dsp::mel_loss_windows()) {
        auto bank = dsp::make_mel_bank<float>(win, mels);
        REQUIRE(bank.weights.dim(0) == mels);
        REQUIRE(bank.weights.dim(1) == win / 2 + 1);
        for (int m = 0; m < mels; ++m) {
            float row = 0;
            for (int f = 0; f <= win / 2; ++f) {
                REQUIRE(bank.weights.at(m, f) >= 0.0f);
                row += bank.weights.at(m, f);
            }
            REQUIRE(row > 0.0f);
        }
    }
}

TEST_CASE("mel spectrogram basics", "[dsp]") {
    auto bank = dsp::make_mel_bank<float>(256, 32);

    Waveform zero{std::vector<float>(4000, 0.0f), 16000};
    auto mz = dsp::mel_spectrogram(zero, bank);
    for (int64_t i = 0; i < mz.size(); ++i) REQUIRE(mz[i] == 0.0f);

    auto w = noise_clip(4000, 17);
    auto m1 = dsp::mel_spectrogram(w, bank);
    auto m2 = dsp::mel_spectrogram(w, bank);
    REQUIRE(m1.size() == m2.size());
    for (int64_t i = 0; i < m1.size(); ++i) {
        REQUIRE(m1[i] == m2[i]);
        REQUIRE(m1[i] >= 0.0f);
    }

    Waveform tiny{std::vector<float>(100, 0.0f), 16000};
    REQUIRE_THROWS_AS(dsp::mel_spectrogram(tiny, bank), Error);
}

TEST_CASE("pure tone lands in the covering mel bins", "[dsp]") {
    const int win = 512;
    auto bank = dsp::make_mel_bank<float>(win, 64);
    Waveform tone;
    tone.samples.resize(8000);
    for (size_t i = 0; i < tone.samples.size(); ++i)
        tone.samples[i] = std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 16000.0);
    auto mel = dsp::mel_spectrogram(tone, bank);

    // bins whose filters touch 1 kHz (bin index 1000/ (16000/512) = 32)
    const int bin_1k = 32;
    std::vector<bool> covers(64, false);
    for (int m = 0; m < 64; ++m) covers[static_cast<size_t>(m)] = bank.weights.at(m, bin_1k) > 0.0f;

    double in_band = 0, total = 0;
    for (int t = 0; t < mel.dim(0); ++t)
        for (int m = 0; m < 64; ++m) {
            total += mel.at(t, m);
            if (covers[static_cast<size_t>(m)]) in_band += mel.at(t, m);
        }
    REQUIRE(in_band / total > 0.5);
}
