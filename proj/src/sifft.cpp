#include "vofdm/sifft.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdlib>
#include <cstdio>
#include <map>
#include <set>

#include "vofdm/numerics.hpp"

namespace vofdm {

namespace {

void check_perm(const PermutationParams& p, long n) {
    if (!is_pow2(n)) throw std::invalid_argument("permutation: n must be a power of two");
    if (p.sigma % 2 == 0) throw std::invalid_argument("permutation: sigma must be odd");
}

}  // namespace

CVec permute_exact(const CVec& X, const PermutationParams& p) {
    const long n = X.size();
    check_perm(p, n);
    CVec out(n);
    for (long k = 0; k < n; ++k)
        out[k] = X[imod(p.sigma * k - p.a, n)] *
                 std::polar(1.0, kTwoPi * static_cast<double>(p.b) * k / static_cast<double>(n));
    return out;
}

CVec permute_approx(const CVec& X, const PermutationParams& p) {
    const long n = X.size();
    check_perm(p, n);
    CVec out(n);
    for (long k = 0; k < n; ++k)
        out[k] = X[imod(p.sigma * (k - p.a), n)] *
                 std::polar(1.0, kTwoPi * static_cast<double>(imod(p.sigma * p.b, n)) * k /
                                     static_cast<double>(n));
    return out;
}

long perm_time_index(PermKind kind, const PermutationParams& p, long n, long t) {
    return kind == PermKind::Exact ? imod(p.sigma * t - p.b, n) : imod(p.sigma * (t - p.b), n);
}

Complex perm_time_phase(PermKind kind, const PermutationParams& p, long n, long t) {
    const long mult = kind == PermKind::Exact ? imod(p.a * t, n) : imod(p.sigma * p.a % n * t, n);
    return std::polar(1.0, kTwoPi * static_cast<double>(mult) / static_cast<double>(n));
}

long mod_inverse_pow2(long sigma, long n) {
    if (sigma % 2 == 0) throw std::invalid_argument("mod_inverse_pow2: even sigma");
    // Newton-Hensel lifting; 6 steps cover 64-bit moduli.
    unsigned long long x = 1, s = static_cast<unsigned long long>(imod(sigma, n));
    const unsigned long long mask = static_cast<unsigned long long>(n - 1);
    for (int i = 0; i < 6; ++i) x = (x * (2 - s * x)) & mask;
    return static_cast<long>(x & mask);
}

FlatWindow build_flat_window(int B, double alpha, double eps, long n) {
    if (!is_pow2(n)) throw std::invalid_argument("build_flat_window: n must be a power of two");
    if (B < 1 || n % B != 0) throw std::invalid_argument("build_flat_window: B must divide n");
    if (!(alpha > 0 && alpha < 1) || !(eps > 0 && eps < 1))
        throw std::invalid_argument("build_flat_window: need 0 < alpha, eps < 1");
    const double bin = static_cast<double>(n) / B;
    const double t_pass = (1.0 - alpha) * bin / 2.0;
    const double t_stop = bin / 2.0;
    if (2.0 * t_pass < 1.0)
        throw config_error("build_flat_window: passband narrower than one sample");

    // Gaussian-smoothed boxcar: edge at the passband/stopband midpoint, std
    // sized so the erf tail is below eps/4 at both measurement boundaries.
    const double t_box = 0.5 * (t_pass + t_stop);
    const double tail = std::sqrt(2.0 * std::log(4.0 / eps));
    const double sigma_t = std::max(1e-3, (t_stop - t_box) / tail);

    CVec g(n);
    for (long t = 0; t < n; ++t) {
        const double tau = t <= n / 2 ? static_cast<double>(t) : static_cast<double>(t - n);
        g[t] = 0.5 * (std::erf((t_box - tau) / (std::sqrt(2.0) * sigma_t)) +
                      std::erf((t_box + tau) / (std::sqrt(2.0) * sigma_t)));
    }

    FlatWindow w;
    w.n = n;
    w.B = B;
    w.alpha = alpha;
    w.eps = eps;
    w.freq = dft(g, /*normalized=*/false);

    // Truncate the spectrum where the Gaussian factor ensures the discarded
    // mass is negligible; at desk scale this usually keeps full support.
    const double sigma_f = static_cast<double>(n) / (kTwoPi * sigma_t);
    const double half = sigma_f * std::sqrt(2.0 * std::log(2.0 * (2.0 * t_box + 1) *
                                                           static_cast<double>(n) / eps)) + 2.0;
    long halfwidth = static_cast<long>(std::ceil(half));
    if (2 * halfwidth + 1 >= n) {
        halfwidth = n / 2;
        w.support = n;
    } else {
        for (long f = halfwidth + 1; f <= n - halfwidth - 1; ++f) w.freq[f] = 0;
        w.support = 2 * halfwidth + 1;
    }

    w.time = idft(w.freq, /*normalized=*/false);
    const Complex g0 = w.time[0];
    if (std::abs(g0) < 1e-12) throw config_error("build_flat_window: degenerate window");
    w.freq /= g0;
    w.time /= g0;

    for (long t = 0; t < n; ++t) {
        const double tau = std::abs(t <= n / 2 ? static_cast<double>(t) : static_cast<double>(t - n));
        const double mag = std::abs(w.time[t]);
        if (tau <= t_pass)
            w.passband_ripple = std::max(w.passband_ripple, std::abs(w.time[t] - Complex(1, 0)));
        else if (tau >= t_stop)
            w.stopband_peak = std::max(w.stopband_peak, mag);
    }
    if (w.passband_ripple > eps || w.stopband_peak > eps)
        throw config_error("build_flat_window: requested eps " + std::to_string(eps) +
                           " not met (ripple " + std::to_string(w.passband_ripple) + ", stopband " +
                           std::to_string(w.stopband_peak) + ") at n=" + std::to_string(n));
    return w;
}

CVec hash_to_bins(const CVec& H_P, const std::vector<std::pair<long, Complex>>& h_partial,
                  PermKind kind, const PermutationParams& p, const FlatWindow& w,
                  HashStats* stats) {
    const long n = H_P.size();
    if (w.n != n) throw std::invalid_argument("hash_to_bins: window length mismatch");
    const int B = w.B;
    check_perm(p, n);

    // Fold the windowed, permuted spectrum into B bins. Only the window support
    // contributes; the rest of the spectrum is never touched.
    CVec V = CVec::Zero(B);
    auto accumulate = [&](long k) {
        if (w.freq[k] == Complex(0, 0)) return;
        Complex xk;
        if (kind == PermKind::Exact)
            xk = H_P[imod(p.sigma * k - p.a, n)] *
                 std::polar(1.0, kTwoPi * static_cast<double>(imod(p.b * k, n)) /
                                     static_cast<double>(n));
        else
            xk = H_P[imod(p.sigma * (k - p.a), n)] *
                 std::polar(1.0, kTwoPi * static_cast<double>(imod(p.sigma * p.b % n * k, n)) /
                                     static_cast<double>(n));
        V[k % B] += w.freq[k] * xk;
    };
    if (w.support >= n) {
        for (long k = 0; k < n; ++k) accumulate(k);
    } else {
        const long halfwidth = (w.support - 1) / 2;
        for (long d = -halfwidth; d <= halfwidth; ++d) accumulate(imod(d, n));
    }

    // (1/n)-scaled B-point inverse: bin j equals [g * p(h)]_{(n/B) j}.
    CVec out = idft(V, /*normalized=*/false) * (static_cast<double>(B) / static_cast<double>(n));

    const long stride = n / B;
    for (const auto& [t, val] : h_partial) {
        const long q = perm_time_index(kind, p, n, t);
        const Complex c = val * perm_time_phase(kind, p, n, t);
        for (int j = 0; j < B; ++j) out[j] -= c * w.time[imod(stride * j - q, n)];
    }

    if (stats) {
        ++stats->calls;
        stats->samples += w.support;
    }
    return out;
}

namespace {

using SparseMap = std::map<long, Complex>;

std::vector<std::pair<long, Complex>> to_pairs(const SparseMap& m) {
    return {m.begin(), m.end()};
}

// Keep the k largest-magnitude entries (ties toward lower coordinate).
void keep_top_k(SparseMap& m, int k) {
    if (static_cast<int>(m.size()) <= k) return;
    std::vector<std::pair<double, long>> mag;
    mag.reserve(m.size());
    for (const auto& [c, v] : m) mag.emplace_back(std::norm(v), c);
    std::sort(mag.begin(), mag.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    SparseMap kept;
    for (int i = 0; i < k; ++i) kept[mag[i].second] = m[mag[i].second];
    m = std::move(kept);
}

struct WindowCache {
    long n;
    double eps;
    std::map<std::pair<int, long>, FlatWindow> built;

    const FlatWindow& get(int B, double alpha) {
        const auto key = std::make_pair(B, std::lround(alpha * 1e9));
        auto it = built.find(key);
        if (it == built.end()) it = built.emplace(key, build_flat_window(B, alpha, eps, n)).first;
        return it->second;
    }
};

void finalize_estimate(ChannelEstimate& est, const SparseMap& taps, const CVec& H_P,
                       const SifftParams& params) {
    est.entries.clear();
    for (const auto& [c, v] : taps) est.entries.emplace_back(static_cast<int>(c), v);
    if (params.compute_residual) {
        const long n = H_P.size();
        CVec hd = CVec::Zero(n);
        double power = 0;
        for (const auto& [c, v] : taps) {
            hd[c] = v;
            power += std::norm(v);
        }
        const double res = (H_P - dft(hd, /*normalized=*/false)).norm();
        est.residual = res;
        const double rest = res * res / static_cast<double>(n);
        est.eta = rest < 1e-24 * std::max(1.0, power)
                      ? std::numeric_limits<double>::infinity()
                      : power / rest;
    }
}

double derive_delta(const CVec& H_P, const SifftParams& params) {
    return params.delta > 0 ? params.delta
                            : 0.05 * H_P.norm() / std::sqrt(static_cast<double>(H_P.size()));
}

double derive_Delta(const CVec& H_P, const SifftParams& params) {
    return params.Delta > 0 ? params.Delta
                            : 2.0 * H_P.norm() / std::sqrt(static_cast<double>(H_P.size()));
}

}  // namespace

ChannelEstimate exactly_sparse_ifft(const CVec& H_P, int K, int M, int P,
                                    const SifftParams& params, Rng& rng) {
    const long n = static_cast<long>(M) * P;
    if (H_P.size() != n) throw std::invalid_argument("exactly_sparse_ifft: H_P length != M*P");
    if (!is_pow2(n)) throw config_error("exactly_sparse_ifft: MP must be a power of two");
    if (K < 1 || K > n) throw std::invalid_argument("exactly_sparse_ifft: bad K");

    const double delta = derive_delta(H_P, params);
    const double Delta = derive_Delta(H_P, params);
    const double eps = delta / (4.0 * static_cast<double>(n) * static_cast<double>(n) * Delta);

    WindowCache cache{n, eps, {}};
    HashStats stats;
    SparseMap taps;

    const int scheduled = 1 + ilog2(next_pow2(K));
    const int b0 = static_cast<int>(std::min<long>(n, next_pow2(std::max(4L, static_cast<long>(params.b_factor) * K))));
    bool converged = false;
    int rounds = 0;

    for (int r = 0; r < scheduled + params.retries; ++r) {
        const int k = r < scheduled ? std::max(1, K >> r) : K;
        const int B = r < scheduled
                          ? static_cast<int>(std::min<long>(
                                n, next_pow2(std::max(4L, static_cast<long>(params.b_factor) * k))))
                          : b0;
        const double alpha =
            std::clamp(params.alpha0 / static_cast<double>(1 << std::min(r, scheduled - 1)),
                       1.0 / 64.0, 0.5);
        const FlatWindow& w = cache.get(B, alpha);

        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(static_cast<std::uint64_t>(n)));
        p.b = static_cast<long>(rng.uniform_u64(static_cast<std::uint64_t>(n)));

        p.a = 0;
        const CVec bins0 = hash_to_bins(H_P, to_pairs(taps), PermKind::Exact, p, w, &stats);
        std::vector<int> hot;
        for (int j = 0; j < B; ++j)
            if (std::abs(bins0[j]) >= delta / 2) hot.push_back(j);

        ++rounds;
        if (hot.empty()) {
            // Only a full-size-B residual pass counts as the convergence check.
            if (r >= scheduled) {
                converged = true;
                break;
            }
            continue;
        }

        p.a = 1;
        const CVec bins1 = hash_to_bins(H_P, to_pairs(taps), PermKind::Exact, p, w, &stats);
        for (int j : hot) {
            const double phase = std::arg(bins1[j] / bins0[j]);
            const long i = imod(std::lround(static_cast<double>(n) / kTwoPi * phase), n);
            taps[i] += bins0[j];
        }
        // Entries cancelled back to (near) zero would otherwise linger forever.
        for (auto it = taps.begin(); it != taps.end();)
            it = std::abs(it->second) < delta * 1e-6 ? taps.erase(it) : std::next(it);
    }

    keep_top_k(taps, K);

    // Gain-corrected value refinement: with the support fixed, each tap value is
    // re-read from fresh hashings, dividing out the window gain at the tap's
    // offset and skipping repetitions where recovered taps collide in a bin.
    if (!taps.empty() && params.value_reps > 0) {
        const int B = b0;
        const FlatWindow& w = cache.get(B, std::clamp(params.alpha0, 1.0 / 64.0, 0.5));
        const long stride = n / B;
        std::map<long, std::vector<Complex>> samples;
        for (int rep = 0; rep < params.value_reps; ++rep) {
            PermutationParams p;
            p.sigma = static_cast<long>(rng.odd_sigma(static_cast<std::uint64_t>(n)));
            p.b = static_cast<long>(rng.uniform_u64(static_cast<std::uint64_t>(n)));
            p.a = 0;
            const CVec bins = hash_to_bins(H_P, {}, PermKind::Exact, p, w, &stats);
            std::map<int, int> bin_load;
            std::map<long, std::pair<int, long>> where;  // coord -> (bin, offset)
            for (const auto& [t, v] : taps) {
                const long q = perm_time_index(PermKind::Exact, p, n, t);
                const int bin = static_cast<int>(
                    imod(std::lround(static_cast<double>(B) * q / static_cast<double>(n)), B));
                const long off = imod(static_cast<long>(bin) * stride - q, n);
                ++bin_load[bin];
                where[t] = {bin, off};
            }
            for (const auto& [t, bw] : where) {
                const auto& [bin, off] = bw;
                if (bin_load[bin] != 1) continue;
                const Complex gain = w.time[off];
                if (std::abs(gain) < 0.5) continue;
                samples[t].push_back(bins[bin] / gain);
            }
        }
        for (auto& [t, vals] : samples) {
            if (vals.empty()) continue;
            std::vector<double> re, im;
            for (Complex v : vals) {
                re.push_back(v.real());
                im.push_back(v.imag());
            }
            std::sort(re.begin(), re.end());
            std::sort(im.begin(), im.end());
            const size_t mid = (re.size() - 1) / 2;  // lower median
            taps[t] = Complex(re[mid], im[mid]);
        }
    }

    ChannelEstimate est;
    est.source = EstimateSource::SifftExact;
    est.low_confidence = !converged;
    est.hash_to_bins_calls = stats.calls;
    est.cfr_samples_read = stats.samples;
    est.rounds = rounds;
    finalize_estimate(est, taps, H_P, params);
    return est;
}

namespace {

struct ApproxContext {
    const CVec& H_P;
    long n;
    WindowCache& cache;
    HashStats& stats;
    Rng& rng;
};

// Range: one narrowing step. Regions of width lambda/J inside [start, start+lambda)
// per active bin collect votes over T_R random (a, tau) phase tests.
void range_step(ApproxContext& ctx, const std::vector<std::pair<long, Complex>>& partial,
                const FlatWindow& w, long sigma, long b, double alpha,
                std::vector<double>& starts, std::vector<bool>& active, double lambda, int J,
                int T_R) {
    const long n = ctx.n;
    const int B = w.B;
    // nu prop alpha^{1/3}; the constant keeps the vote tolerance pi*nu well
    // below the phase-wrap ambiguity of distant regions under random tau.
    const double nu = std::min(0.8, 0.15 * std::cbrt(alpha));
    const long tau_lo = std::max<long>(1, static_cast<long>(std::ceil(n * J * nu / (4.0 * lambda))));
    const long tau_hi = std::max(tau_lo, static_cast<long>(std::floor(n * J * nu / (2.0 * lambda))));

    std::vector<std::vector<int>> votes(B, std::vector<int>(J, 0));
    for (int t = 0; t < T_R; ++t) {
        PermutationParams p0{sigma, 0, b};
        p0.a = static_cast<long>(ctx.rng.uniform_u64(static_cast<std::uint64_t>(n)));
        const long tau =
            tau_lo + static_cast<long>(ctx.rng.uniform_u64(static_cast<std::uint64_t>(tau_hi - tau_lo + 1)));
        PermutationParams p1{sigma, p0.a + tau, b};

        const CVec w0 = hash_to_bins(ctx.H_P, partial, PermKind::Approx, p0, w, &ctx.stats);
        const CVec w1 = hash_to_bins(ctx.H_P, partial, PermKind::Approx, p1, w, &ctx.stats);

        const double sb = static_cast<double>(imod(sigma * b, n));
        for (int i = 0; i < B; ++i) {
            if (!active[i]) continue;
            if (std::abs(w0[i]) < 1e-300) continue;
            const double phi = std::arg(w1[i] / w0[i]);
            for (int j = 0; j < J; ++j) {
                const double mid = starts[i] + (2.0 * j + 1) * lambda / (2.0 * J);
                const double theta = kTwoPi / static_cast<double>(n) * (mid + sb);
                double d = std::fmod(static_cast<double>(tau) * theta - phi, kTwoPi);
                if (d < 0) d += kTwoPi;
                d = std::min(d, kTwoPi - d);
                if (d <= kPi * nu) ++votes[i][j];
            }
        }
    }
    for (int i = 0; i < B; ++i) {
        if (!active[i]) continue;
        int chosen = -1;
        for (int j = 0; j < J; ++j)
            if (votes[i][j] * 2 > T_R) {
                chosen = j;
                break;  // min over winning regions
            }
        if (chosen < 0)
            active[i] = false;
        else
            starts[i] += static_cast<double>(chosen) / J * lambda;
    }
}

// Coordinate: fix (sigma, b), narrow each bin's region until width <= 1, then
// undo the permutation to recover original-domain coordinates.
std::vector<long> coordinate_step(ApproxContext& ctx,
                                  const std::vector<std::pair<long, Complex>>& partial,
                                  const FlatWindow& w, double alpha) {
    const long n = ctx.n;
    const int B = w.B;
    const long sigma = static_cast<long>(ctx.rng.odd_sigma(static_cast<std::uint64_t>(n)));
    const long b = static_cast<long>(ctx.rng.uniform_u64(static_cast<std::uint64_t>(n)));

    const double lambda0 = static_cast<double>(n) / B;
    const int J = std::max(8, ilog2(n));
    const int T_R = std::max(2, static_cast<int>(std::ceil(std::log2(std::max(2.0, std::log2(static_cast<double>(n)))))) + 1);
    const int T_C = std::max(1, static_cast<int>(std::ceil(std::log(lambda0) / std::log(J / 4.0))));

    std::vector<double> starts(B);
    std::vector<bool> active(B, true);
    // Regions aligned with round-based bin hashing: bin i covers
    // [(n/B) i - n/(2B), (n/B) i + n/(2B)).
    for (int i = 0; i < B; ++i)
        starts[i] = static_cast<double>(n) / B * i - static_cast<double>(n) / (2.0 * B);

    double lambda = lambda0;
    for (int t = 0; t < T_C; ++t) {
        range_step(ctx, partial, w, sigma, b, alpha, starts, active, lambda, J, T_R);
        lambda *= 4.0 / J;
    }

    const long sigma_inv = mod_inverse_pow2(sigma, n);
    std::set<long> coords;
    for (int i = 0; i < B; ++i) {
        if (!active[i]) continue;
        const long q = imod(static_cast<long>(std::ceil(starts[i] + lambda / 2 - 0.5 - 1e-9)), n);
        coords.insert(imod(sigma_inv * q + b, n));
    }
    return {coords.begin(), coords.end()};
}

// Value: median (componentwise, lower) of the phase-corrected bin reads over
// T_V fresh hashings; keeps the keep_k largest. Reads are divided by the window
// gain at the tap's in-bin offset, and repetitions where two candidates share a
// bin (or the gain is deep in the transition band) are skipped for that
// candidate; raw reads are the fallback when every repetition is skipped.
SparseMap value_step(ApproxContext& ctx, const std::vector<std::pair<long, Complex>>& partial,
                     const FlatWindow& w, const std::vector<long>& coords, int keep_k, int T_V) {
    const long n = ctx.n;
    const int B = w.B;
    const long stride = n / B;

    std::vector<PermutationParams> perms(T_V);
    std::vector<CVec> reads(T_V);
    for (int t = 0; t < T_V; ++t) {
        perms[t].sigma = static_cast<long>(ctx.rng.odd_sigma(static_cast<std::uint64_t>(n)));
        perms[t].a = static_cast<long>(ctx.rng.uniform_u64(static_cast<std::uint64_t>(n)));
        perms[t].b = static_cast<long>(ctx.rng.uniform_u64(static_cast<std::uint64_t>(n)));
        reads[t] = hash_to_bins(ctx.H_P, partial, PermKind::Approx, perms[t], w, &ctx.stats);
    }

    // per repetition: how many candidate coordinates land in each bin
    std::vector<std::vector<int>> load(T_V, std::vector<int>(B, 0));
    for (int t = 0; t < T_V; ++t)
        for (long c : coords) {
            const long q = perm_time_index(PermKind::Approx, perms[t], n, c);
            ++load[t][imod(std::lround(static_cast<double>(B) * q / static_cast<double>(n)), B)];
        }

    SparseMap out;
    std::vector<double> re, im, re_raw, im_raw;
    for (long c : coords) {
        re.clear();
        im.clear();
        re_raw.clear();
        im_raw.clear();
        for (int t = 0; t < T_V; ++t) {
            const long q = perm_time_index(PermKind::Approx, perms[t], n, c);
            const int bin = static_cast<int>(
                imod(std::lround(static_cast<double>(B) * q / static_cast<double>(n)), B));
            const Complex raw =
                reads[t][bin] * std::conj(perm_time_phase(PermKind::Approx, perms[t], n, c));
            re_raw.push_back(raw.real());
            im_raw.push_back(raw.imag());
            if (load[t][bin] != 1) continue;
            const Complex gain = w.time[imod(static_cast<long>(bin) * stride - q, n)];
            if (std::abs(gain) < 0.5) continue;
            const Complex v = raw / gain;
            re.push_back(v.real());
            im.push_back(v.imag());
        }
        if (re.empty()) {
            re = re_raw;
            im = im_raw;
        }
        std::sort(re.begin(), re.end());
        std::sort(im.begin(), im.end());
        const size_t mid = (re.size() - 1) / 2;  // lower median
        out[c] = Complex(re[mid], im[mid]);
    }
    keep_top_k(out, keep_k);
    return out;
}

}  // namespace

ChannelEstimate approximately_sparse_ifft(const CVec& H_P, int K, int M, int P,
                                          const SifftParams& params, Rng& rng) {
    const long n = static_cast<long>(M) * P;
    if (H_P.size() != n) throw std::invalid_argument("approximately_sparse_ifft: H_P length != M*P");
    if (!is_pow2(n)) throw config_error("approximately_sparse_ifft: MP must be a power of two");
    if (K < 1 || K > n) throw std::invalid_argument("approximately_sparse_ifft: bad K");

    const double eps = 1.0 / (4.0 * static_cast<double>(n) * static_cast<double>(n));
    WindowCache cache{n, eps, {}};
    HashStats stats;
    ApproxContext ctx{H_P, n, cache, stats, rng};

    int T_A = params.t_outer;
    if (T_A <= 0) {
        const double lk = std::log2(std::max(2.0, static_cast<double>(K)));
        T_A = std::max(2, static_cast<int>(std::ceil(lk / std::max(1.0, std::log2(std::max(2.0, lk))))) + 1);
    }

    SparseMap taps;
    bool starved = false;
    int rounds = 0;

    for (int t = 0; t < T_A; ++t) {
        const double alpha =
            std::clamp(params.alpha0_approx / std::pow(t + 1.0, 4.0), 1.0 / 32.0, 0.5);
        double kf = K;
        for (int i = 1; i <= t; ++i) kf /= static_cast<double>(i) * i;
        const int k = std::max(1, static_cast<int>(std::lround(kf)));
        const long b_raw = static_cast<long>(
            std::ceil(static_cast<double>(params.b_factor_approx) * K / std::pow(t + 1.0, 6.0)));
        // floor at 4x the residual sparsity so late rounds keep resolving collisions
        const int B = static_cast<int>(
            std::min<long>(n, next_pow2(std::max({4L, b_raw, 4L * k}))));
        int T_V = std::max(params.t_value_min,
                           static_cast<int>(std::ceil(std::log2(std::max(2.0, B / (k * alpha))))));
        T_V |= 1;

        const FlatWindow& w = cache.get(B, alpha);
        const auto partial = to_pairs(taps);
        const std::vector<long> coords = coordinate_step(ctx, partial, w, alpha);
        ++rounds;
        if (std::getenv("VOFDM_SIFFT_DEBUG")) {
            std::fprintf(stderr, "[approx t=%d B=%d alpha=%.4f k=%d T_V=%d] coords:", t, B,
                         alpha, k, T_V);
            for (long c : coords) std::fprintf(stderr, " %ld", c);
            std::fprintf(stderr, "\n");
        }
        if (coords.empty()) {
            starved = static_cast<int>(taps.size()) < K;
            break;
        }
        const SparseMap update = value_step(ctx, partial, w, coords, 3 * k, T_V);
        if (std::getenv("VOFDM_SIFFT_DEBUG")) {
            std::fprintf(stderr, "  update:");
            for (const auto& [c, v] : update)
                std::fprintf(stderr, " (%ld: %.3f%+.3fi)", c, v.real(), v.imag());
            std::fprintf(stderr, "\n");
        }
        for (const auto& [c, v] : update) taps[c] += v;
    }

    keep_top_k(taps, K);

    ChannelEstimate est;
    est.source = EstimateSource::SifftApprox;
    est.low_confidence = starved;
    est.hash_to_bins_calls = stats.calls;
    est.cfr_samples_read = stats.samples;
    est.rounds = rounds;
    finalize_estimate(est, taps, H_P, params);
    return est;
}

}  // namespace vofdm
