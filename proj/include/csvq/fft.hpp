#pragma once

#include "csvq/tensor.hpp"

#include <complex>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

namespace csvq::fft {

// Complex DFT for sizes n = 2^a * 5^b (covers the 20 ms analysis window of
// 320 samples and all power-of-two mel windows). Unnormalized in both
// directions; callers apply 1/n where needed.
template <typename T>
class Fft {
  public:
    using C = std::complex<T>;

    explicit Fft(int n) : n_(n) {
        int m = n;
        while (m % 2 == 0) m /= 2;
        while (m % 5 == 0) m /= 5;
        CSVQ_REQUIRE(m == 1 && n >= 1, "fft size must be 2^a*5^b, got " + std::to_string(n));
        tw_.resize(static_cast<size_t>(n));
        const T two_pi = static_cast<T>(2.0 * M_PI);
        for (int k = 0; k < n; ++k) {
            T ang = -two_pi * static_cast<T>(k) / static_cast<T>(n);
            tw_[static_cast<size_t>(k)] = C(std::cos(ang), std::sin(ang));
        }
    }

    int size() const { return n_; }

    // out[k] = sum_j in[j] e^{-+2pi i jk/n}; `in` and `out` must not alias.
    void run(const C* in, C* out, bool inverse) const { rec(in, out, n_, 1, inverse); }

  private:
    C tw(int64_t k, bool inverse) const {
        C w = tw_[static_cast<size_t>(k % n_)];
        return inverse ? std::conj(w) : w;
    }

    void rec(const C* in, C* out, int n, int stride, bool inv) const {
        if (n == 1) {
            out[0] = in[0];
            return;
        }
        const int64_t root = n_ / n;
        if (n % 2 == 0) {
            const int m = n / 2;
            rec(in, out, m, stride * 2, inv);
            rec(in + stride, out + m, m, stride * 2, inv);
            for (int j = 0; j < m; ++j) {
                C t = tw(root * j, inv) * out[m + j];
                out[m + j] = out[j] - t;
                out[j] += t;
            }
            return;
        }
        // radix-5 step
        const int m = n / 5;
        for (int i = 0; i < 5; ++i) rec(in + static_cast<int64_t>(i) * stride, out + static_cast<int64_t>(i) * m, m, stride * 5, inv);
        C a[5];
        for (int j = 0; j < m; ++j) {
            for (int i = 0; i < 5; ++i) a[i] = tw(root * static_cast<int64_t>(i) * j, inv) * out[i * m + j];
            for (int t = 0; t < 5; ++t) {
                C acc = a[0];
                for (int i = 1; i < 5; ++i) acc += tw(static_cast<int64_t>(n_) / 5 * ((static_cast<int64_t>(i) * t) % 5), inv) * a[i];
                out[j + t * m] = acc;
            }
        }
    }

    int n_;
    std::vector<C> tw_;
};

// Shared immutable plan cache.
template <typename T>
const Fft<T>& plan(int n) {
    static std::mutex mu;
    static std::unordered_map<int, std::unique_ptr<Fft<T>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Fft<T>>(n)).first;
    return *it->second;
}

// Scratch buffers for the real-transform wrappers below.
template <typename T>
struct Work {
    std::vector<std::complex<T>> a, b;
    void resize(int n) {
        if (static_cast<int>(a.size()) < n) {
            a.resize(static_cast<size_t>(n));
            b.resize(static_cast<size_t>(n));
        }
    }
};

// Real FFT: X[k] = sum_j x[j] e^{-2pi i jk/n}, k = 0..n/2.
template <typename T>
void rfft(const Fft<T>& p, const T* x, std::complex<T>* X, Work<T>& w) {
    const int n = p.size();
    w.resize(n);
    for (int j = 0; j < n; ++j) w.a[static_cast<size_t>(j)] = std::complex<T>(x[j], T(0));
    p.run(w.a.data(), w.b.data(), false);
    for (int k = 0; k <= n / 2; ++k) X[k] = w.b[static_cast<size_t>(k)];
}

// Inverse real FFT with 1/n normalization. Input bins 0..n/2 are treated as
// an arbitrary complex vector; the result is Re(idft(hermitian-extension)),
// so imaginary parts of bins 0 and n/2 have no effect.
template <typename T>
void irfft(const Fft<T>& p, const std::complex<T>* X, T* x, Work<T>& w) {
    const int n = p.size();
    const int m = n / 2;
    w.resize(n);
    w.a[0] = X[0];
    w.a[static_cast<size_t>(m)] = X[m];
    for (int k = 1; k < m; ++k) {
        w.a[static_cast<size_t>(k)] = X[k];
        w.a[static_cast<size_t>(n - k)] = std::conj(X[k]);
    }
    p.run(w.a.data(), w.b.data(), true);
    const T inv_n = T(1) / static_cast<T>(n);
    for (int j = 0; j < n; ++j) x[j] = w.b[static_cast<size_t>(j)].real() * inv_n;
}

// Adjoint of rfft as a linear map R^n -> R^{2(n/2+1)}:
// gx[j] = Re(sum_{k=0}^{n/2} g[k] e^{+2pi i jk/n}).
template <typename T>
void rfft_adjoint(const Fft<T>& p, const std::complex<T>* g, T* gx, Work<T>& w) {
    const int n = p.size();
    const int m = n / 2;
    w.resize(n);
    for (int k = 0; k <= m; ++k) w.a[static_cast<size_t>(k)] = g[k];
    for (int k = m + 1; k < n; ++k) w.a[static_cast<size_t>(k)] = std::complex<T>(0, 0);
    p.run(w.a.data(), w.b.data(), true);
    for (int j = 0; j < n; ++j) gx[j] = w.b[static_cast<size_t>(j)].real();
}

// Adjoint of irfft: gX[k] = c_k/n * dft(g)[k] with c_0 = c_{n/2} = 1 (real
// part only) and c_k = 2 otherwise.
template <typename T>
void irfft_adjoint(const Fft<T>& p, const T* g, std::complex<T>* gX, Work<T>& w) {
    const int n = p.size();
    const int m = n / 2;
    w.resize(n);
    for (int j = 0; j < n; ++j) w.a[static_cast<size_t>(j)] = std::complex<T>(g[j], T(0));
    p.run(w.a.data(), w.b.data(), false);
    const T inv_n = T(1) / static_cast<T>(n);
    gX[0] = std::complex<T>(w.b[0].real() * inv_n, T(0));
    gX[m] = std::complex<T>(w.b[static_cast<size_t>(m)].real() * inv_n, T(0));
    for (int k = 1; k < m; ++k) gX[k] = w.b[static_cast<size_t>(k)] * (T(2) * inv_n);
}

}  // namespace csvq::fft
