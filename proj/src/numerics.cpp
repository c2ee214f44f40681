#include "vofdm/numerics.hpp"

#include <cmath>
#include <vector>

namespace vofdm {

namespace {

// Iterative radix-2 Cooley-Tukey, in place. sign = -1 forward, +1 inverse.
void fft_pow2(CVec& a, int sign) {
    const long n = a.size();
    if (n == 1) return;

    // bit reversal
    for (long i = 1, j = 0; i < n; ++i) {
        long bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (long len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / static_cast<double>(len);
        const long half = len >> 1;
        std::vector<Complex> tw(half);
        for (long k = 0; k < half; ++k) tw[k] = std::polar(1.0, ang * static_cast<double>(k));
        for (long i = 0; i < n; i += len) {
            for (long k = 0; k < half; ++k) {
                const Complex u = a[i + k];
                const Complex v = a[i + k + half] * tw[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
}

void check_len(const CVec& x) {
    if (x.size() < 1) throw std::invalid_argument("transform input must have length >= 1");
    if (!is_pow2(x.size()))
        throw std::invalid_argument("transform length must be a power of two, got " +
                                    std::to_string(x.size()));
}

}  // namespace

CVec dft(const CVec& x, bool normalized) {
    check_len(x);
    CVec a = x;
    fft_pow2(a, -1);
    if (normalized) a /= std::sqrt(static_cast<double>(x.size()));
    return a;
}

CVec idft(const CVec& X, bool normalized) {
    check_len(X);
    CVec a = X;
    fft_pow2(a, +1);
    const double n = static_cast<double>(X.size());
    a /= normalized ? std::sqrt(n) : n;
    return a;
}

CVec naive_dft(const CVec& x, bool normalized) {
    if (x.size() < 1) throw std::invalid_argument("transform input must have length >= 1");
    const long n = x.size();
    CVec out(n);
    for (long f = 0; f < n; ++f) {
        Complex acc = 0;
        for (long t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -kTwoPi * static_cast<double>(f) *
                                              static_cast<double>(t) / static_cast<double>(n));
        out[f] = acc;
    }
    if (normalized) out /= std::sqrt(static_cast<double>(n));
    return out;
}

CVec naive_idft(const CVec& X, bool normalized) {
    if (X.size() < 1) throw std::invalid_argument("transform input must have length >= 1");
    const long n = X.size();
    CVec out(n);
    for (long t = 0; t < n; ++t) {
        Complex acc = 0;
        for (long f = 0; f < n; ++f)
            acc += X[f] * std::polar(1.0, kTwoPi * static_cast<double>(f) *
                                              static_cast<double>(t) / static_cast<double>(n));
        out[t] = acc;
    }
    out /= normalized ? std::sqrt(static_cast<double>(n)) : static_cast<double>(n);
    return out;
}

CVec circular_convolve(const CVec& x, const CVec& h) {
    if (h.size() > x.size())
        throw std::invalid_argument("kernel longer than signal in circular_convolve");
    const long n = x.size();
    CVec y = CVec::Zero(n);
    for (long d = 0; d < h.size(); ++d) {
        if (h[d] == Complex(0, 0)) continue;
        for (long t = 0; t < n; ++t) y[t] += h[d] * x[imod(t - d, n)];
    }
    return y;
}

}  // namespace vofdm
