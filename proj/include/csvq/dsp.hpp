#pragma once

#include "csvq/fft.hpp"
#include "csvq/tensor.hpp"

#include <complex>
#include <vector>

namespace csvq::dsp {

inline constexpr int kSampleRate = 16000;
inline constexpr int kWinLen = 320;  // 20 ms
inline constexpr int kHop = 80;      // 5 ms
inline constexpr int kFftSize = kWinLen;
inline constexpr int kBins = kFftSize / 2 + 1;  // 161

template <typename T>
struct WaveformT {
    std::vector<T> samples;
    int sample_rate = kSampleRate;

    int64_t size() const { return static_cast<int64_t>(samples.size()); }
};

// Complex T-F representation, values laid out [frames x bins x 2] (re, im).
template <typename T>
struct ComplexSpectrumT {
    Tensor<T> values;
    int win_len = kWinLen;
    int hop = kHop;

    int frames() const { return values.rank() == 3 ? values.dim(0) : 0; }
    int bins() const { return values.rank() == 3 ? values.dim(1) : 0; }
};

using Waveform = WaveformT<float>;
using ComplexSpectrum = ComplexSpectrumT<float>;

// Periodic Hann window.
template <typename T>
std::vector<T> hann(int n) {
    std::vector<T> w(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j)
        w[static_cast<size_t>(j)] = static_cast<T>(0.5 - 0.5 * std::cos(2.0 * M_PI * j / n));
    return w;
}

// Causal framing: frame t covers samples [hop*t, hop*t + win). No padding.
inline int num_frames(int64_t samples, int win, int hop) {
    CSVQ_REQUIRE(samples >= win, "clip shorter than one window (" + std::to_string(samples) +
                                     " < " + std::to_string(win) + " samples)");
    return static_cast<int>((samples - win) / hop) + 1;
}

template <typename T>
ComplexSpectrumT<T> analyze_stft(const WaveformT<T>& wave) {
    CSVQ_REQUIRE(wave.sample_rate == kSampleRate, "codec path requires 16 kHz input");
    const int t_frames = num_frames(wave.size(), kWinLen, kHop);
    const auto win = hann<T>(kWinLen);
    const auto& p = fft::plan<T>(kFftSize);
    fft::Work<T> scratch;

    ComplexSpectrumT<T> spec;
    spec.values = Tensor<T>({t_frames, kBins, 2});
    std::vector<T> buf(kWinLen);
    std::vector<std::complex<T>> bins(kBins);
    for (int t = 0; t < t_frames; ++t) {
        const T* src = wave.samples.data() + static_cast<int64_t>(t) * kHop;
        for (int j = 0; j < kWinLen; ++j) buf[static_cast<size_t>(j)] = src[j] * win[static_cast<size_t>(j)];
        fft::rfft(p, buf.data(), bins.data(), scratch);
        for (int f = 0; f < kBins; ++f) {
            spec.values.at(t, f, 0) = bins[static_cast<size_t>(f)].real();
            spec.values.at(t, f, 1) = bins[static_cast<size_t>(f)].imag();
        }
    }
    return spec;
}

// Per-sample normalized overlap-add. Wherever the window-square sum is
// nonzero this inverts analyze_stft exactly on consistent spectra.
template <typename T>
WaveformT<T> synthesize_istft(const ComplexSpectrumT<T>& spec) {
    CSVQ_REQUIRE(spec.values.rank() == 3 && spec.bins() == kBins && spec.values.dim(2) == 2,
                 "spectrum shape must be [T x 161 x 2], got " + shape_str(spec.values.shape()));
    const int t_frames = spec.frames();
    const int64_t n = static_cast<int64_t>(t_frames - 1) * kHop + kWinLen;
    const auto win = hann<T>(kWinLen);
    const auto& p = fft::plan<T>(kFftSize);
    fft::Work<T> scratch;

    WaveformT<T> wave;
    wave.samples.assign(static_cast<size_t>(n), T(0));
    std::vector<T> cola(static_cast<size_t>(n), T(0));
    std::vector<std::complex<T>> bins(kBins);
    std::vector<T> buf(kWinLen);
    for (int t = 0; t < t_frames; ++t) {
        for (int f = 0; f < kBins; ++f)
            bins[static_cast<size_t>(f)] = {spec.values.at(t, f, 0), spec.values.at(t, f, 1)};
        fft::irfft(p, bins.data(), buf.data(), scratch);
        const int64_t base = static_cast<int64_t>(t) * kHop;
        for (int j = 0; j < kWinLen; ++j) {
            wave.samples[static_cast<size_t>(base + j)] += win[static_cast<size_t>(j)] * buf[static_cast<size_t>(j)];
            cola[static_cast<size_t>(base + j)] += win[static_cast<size_t>(j)] * win[static_cast<size_t>(j)];
        }
    }
    for (int64_t j = 0; j < n; ++j) {
        T c = cola[static_cast<size_t>(j)];
        wave.samples[static_cast<size_t>(j)] = c > T(1e-8) ? wave.samples[static_cast<size_t>(j)] / c : T(0);
    }
    return wave;
}

// Magnitude^p with phase preserved. p = 1 is the identity; zero magnitude
// stays zero.
template <typename T>
ComplexSpectrumT<T> power_law_compress(const ComplexSpectrumT<T>& spec, T exponent) {
    CSVQ_REQUIRE(exponent > T(0) && exponent <= T(1), "power-law exponent must be in (0, 1]");
    ComplexSpectrumT<T> out = spec;
    if (exponent == T(1)) return out;
    for (int64_t i = 0; i < spec.values.size(); i += 2) {
        T re = spec.values[i], im = spec.values[i + 1];
        T m = std::sqrt(re * re + im * im);
        if (m > T(0)) {
            T scale = std::pow(m, exponent - T(1));
            out.values[i] = re * scale;
            out.values[i + 1] = im * scale;
        } else {
            out.values[i] = T(0);
            out.values[i + 1] = T(0);
        }
    }
    return out;
}

template <typename T>
struct MelFilterbankT {
    int win_len = 0;
    int n_mels = 0;
    Tensor<T> weights;  // [n_mels x (win_len/2 + 1)]
};

using MelFilterbank = MelFilterbankT<float>;

template <typename T>
T hz_to_mel(T f) {
    return T(2595) * std::log10(T(1) + f / T(700));
}
template <typename T>
T mel_to_hz(T m) {
    return T(700) * (std::pow(T(10), m / T(2595)) - T(1));
}

// Triangular filters on the mel scale, evaluated at bin centers over
// [0, sr/2]. Rows that would come out empty get a unit tap at the bin
// nearest their center so every filter covers some band.
template <typename T>
MelFilterbankT<T> make_mel_bank(int win_len, int n_mels, int sample_rate = kSampleRate) {
    const int n_bins = win_len / 2 + 1;
    MelFilterbankT<T> bank;
    bank.win_len = win_len;
    bank.n_mels = n_mels;
    bank.weights = Tensor<T>({n_mels, n_bins});

    const T mel_max = hz_to_mel<T>(static_cast<T>(sample_rate) / 2);
    std::vector<T> hz(static_cast<size_t>(n_mels + 2));
    for (int i = 0; i < n_mels + 2; ++i)
        hz[static_cast<size_t>(i)] = mel_to_hz<T>(mel_max * static_cast<T>(i) / static_cast<T>(n_mels + 1));

    const T bin_hz = static_cast<T>(sample_rate) / static_cast<T>(win_len);
    for (int m = 0; m < n_mels; ++m) {
        const T lo = hz[static_cast<size_t>(m)], mid = hz[static_cast<size_t>(m + 1)], hi = hz[static_cast<size_t>(m + 2)];
        T row_sum = T(0);
        for (int f = 0; f < n_bins; ++f) {
            T fz = bin_hz * static_cast<T>(f);
            T up = (fz - lo) / (mid - lo);
            T down = (hi - fz) / (hi - mid);
            T w = std::max(T(0), std::min(up, down));
            bank.weights.at(m, f) = w;
            row_sum += w;
        }
        if (row_sum <= T(0)) {
            int f = static_cast<int>(std::round(mid / bin_hz));
            f = std::min(std::max(f, 0), n_bins - 1);
            bank.weights.at(m, f) = T(1);
        }
    }
    return bank;
}

// STFT magnitude at the bank's window (hop = win/4) filtered by the bank.
template <typename T>
Tensor<T> mel_spectrogram(const WaveformT<T>& wave, const MelFilterbankT<T>& bank) {
    const int win = bank.win_len;
    const int hop = win / 4;
    const int n_bins = win / 2 + 1;
    const int t_frames = num_frames(wave.size(), win, hop);
    const auto w = hann<T>(win);
    const auto& p = fft::plan<T>(win);
    fft::Work<T> scratch;

    Tensor<T> out({t_frames, bank.n_mels});
    std::vector<T> buf(static_cast<size_t>(win));
    std::vector<std::complex<T>> bins(static_cast<size_t>(n_bins));
    std::vector<T> mag(static_cast<size_t>(n_bins));
    for (int t = 0; t < t_frames; ++t) {
        const T* src = wave.samples.data() + static_cast<int64_t>(t) * hop;
        for (int j = 0; j < win; ++j) buf[static_cast<size_t>(j)] = src[j] * w[static_cast<size_t>(j)];
        fft::rfft(p, buf.data(), bins.data(), scratch);
        for (int f = 0; f < n_bins; ++f) mag[static_cast<size_t>(f)] = std::abs(bins[static_cast<size_t>(f)]);
        Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> mv(mag.data(), n_bins);
        Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> ov(out.data() + static_cast<int64_t>(t) * bank.n_mels, bank.n_mels);
        ov.noalias() = bank.weights.mat(bank.n_mels, n_bins) * mv;
    }
    return out;
}

// Loss-side mel configuration: six windows with hop = win/4.
inline const std::vector<std::pair<int, int>>& mel_loss_windows() {
    static const std::vector<std::pair<int, int>> cfg = {
        {64, 8}, {128, 16}, {256, 32}, {512, 64}, {1024, 128}, {2048, 128}};
    return cfg;
}

}  // namespace csvq::dsp
