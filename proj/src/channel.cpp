#include "vofdm/channel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

namespace vofdm {

std::vector<int> SparseChannel::coords() const {
    std::vector<int> j;
    j.reserve(taps.size());
    for (const Tap& t : taps) j.push_back(t.delay);
    return j;
}

CVec SparseChannel::dense(long n) const {
    CVec h = CVec::Zero(n);
    for (const Tap& t : taps) {
        if (t.delay >= n) throw std::invalid_argument("dense(): tap delay exceeds length");
        h[t.delay] = t.value;
    }
    return h;
}

double SparseChannel::l2_norm() const {
    double s = 0;
    for (const Tap& t : taps) s += std::norm(t.value);
    return std::sqrt(s);
}

void SparseChannel::normalize() {
    const double nrm = l2_norm();
    if (nrm == 0) throw std::invalid_argument("cannot normalize an all-zero channel");
    for (Tap& t : taps) t.value /= nrm;
}

SparseChannel sample_sparse_channel(int K, int D, Rng& rng, bool normalize,
                                    bool force_zero_tap) {
    if (K < 1 || K > D + 1)
        throw std::invalid_argument("sample_sparse_channel: need 1 <= K <= D+1");

    // Floyd's algorithm: distinct delays uniform without replacement from {lo..D}.
    const int lo = force_zero_tap ? 1 : 0;
    const int want = force_zero_tap ? K - 1 : K;
    std::set<int> delays;
    if (force_zero_tap) delays.insert(0);
    for (int top = D + 1 - want; top <= D; ++top) {
        int j = lo + static_cast<int>(rng.uniform_u64(static_cast<std::uint64_t>(top - lo + 1)));
        if (!delays.insert(j).second) delays.insert(top);
    }

    SparseChannel h;
    h.max_delay = D;
    for (int j : delays) {
        Complex v = rng.cnormal(1.0);
        while (v == Complex(0, 0)) v = rng.cnormal(1.0);
        h.taps.push_back({j, v});
    }
    if (normalize) h.normalize();
    return h;
}

CVec transmit(const CVec& x_cp, int cp_len, const SparseChannel& h, const NoiseSpec& noise,
              Rng& rng) {
    int d_max = 0;
    for (const auto& t : h.taps) d_max = std::max(d_max, t.delay);
    if (cp_len < d_max)
        throw config_error("transmit: CP length " + std::to_string(cp_len) +
                           " shorter than channel delay spread " + std::to_string(d_max) +
                           " (IBI would occur)");

    const long n = x_cp.size() - cp_len;
    if (n < 1) throw std::invalid_argument("transmit: signal shorter than CP");

    CVec y = CVec::Zero(n);
    for (const auto& tap : h.taps)
        for (long t = 0; t < n; ++t) y[t] += tap.value * x_cp[cp_len + t - tap.delay];
    if (noise.variance > 0)
        for (long t = 0; t < n; ++t) y[t] += rng.cnormal(noise.variance);
    return y;
}

std::pair<std::vector<int>, int> kappa(const std::vector<int>& coords, int M) {
    if (M < 1) throw std::invalid_argument("kappa: M must be >= 1");
    if (coords.empty()) throw std::invalid_argument("kappa: empty coordinate set");
    std::set<int> residues;
    for (int j : coords) residues.insert(static_cast<int>(imod(j, M)));
    std::vector<int> I(residues.begin(), residues.end());
    return {I, static_cast<int>(I.size())};
}

std::pair<std::vector<int>, int> kappa(const SparseChannel& h, int M) {
    return kappa(h.coords(), M);
}

namespace {

double log_binom(int n, int k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

// Stirling numbers of the second kind times k! (= surjection count), by inclusion-exclusion.
double surjections(int n, int k) {
    double s = 0;
    for (int i = 0; i <= k; ++i) {
        const double term = std::exp(log_binom(k, i) + n * std::log(static_cast<double>(k - i > 0 ? k - i : 1)));
        s += (i % 2 == 0 ? 1.0 : -1.0) * (k - i > 0 ? term : (n == 0 ? 1.0 : 0.0));
    }
    return s;
}

}  // namespace

RVec kappa_pmf(int K, int M) {
    if (K < 1 || M < 1) throw std::invalid_argument("kappa_pmf: K, M must be >= 1");
    const int kmax = std::min(K, M);
    RVec p(kmax);
    for (int k = 1; k <= kmax; ++k) {
        const double lg = log_binom(M, k) + log_binom(K, k) + K * std::log(static_cast<double>(k) / M) -
                          k * std::log(static_cast<double>(k)) + std::lgamma(k + 1);
        p[k - 1] = std::exp(lg);
    }
    p /= p.sum();
    return p;
}

RVec kappa_pmf_exact(int K, int M) {
    if (K < 1 || M < 1) throw std::invalid_argument("kappa_pmf_exact: K, M must be >= 1");
    const int kmax = std::min(K, M);
    RVec p(kmax);
    for (int k = 1; k <= kmax; ++k)
        p[k - 1] = std::exp(log_binom(M, k) - K * std::log(static_cast<double>(M))) * surjections(K, k);
    return p;
}

void save_channel(std::ostream& os, const SparseChannel& h) {
    os << h.max_delay << " " << h.tap_count() << "\n";
    os.precision(17);
    for (const auto& t : h.taps) os << t.delay << " " << t.value.real() << " " << t.value.imag() << "\n";
}

SparseChannel load_channel(std::istream& is) {
    SparseChannel h;
    int K = 0;
    if (!(is >> h.max_delay >> K)) throw config_error("channel file: bad header");
    for (int i = 0; i < K; ++i) {
        int j;
        double re, im;
        if (!(is >> j >> re >> im)) throw config_error("channel file: truncated tap list");
        if (j < 0 || j > h.max_delay) throw config_error("channel file: tap delay out of range");
        h.taps.push_back({j, Complex(re, im)});
    }
    std::sort(h.taps.begin(), h.taps.end(), [](const auto& a, const auto& b) { return a.delay < b.delay; });
    for (size_t i = 1; i < h.taps.size(); ++i)
        if (h.taps[i].delay == h.taps[i - 1].delay) throw config_error("channel file: duplicate delay");
    return h;
}

}  // namespace vofdm
