#include <doctest.h>

#include <set>

#include "vofdm/numerics.hpp"
#include "vofdm/sifft.hpp"

using namespace vofdm;

namespace {

CVec random_cvec(long n, Rng& rng) {
    CVec x(n);
    for (long i = 0; i < n; ++i) x[i] = rng.cnormal(1.0);
    return x;
}

// Dense-path oracle for hash_to_bins: full-length windowed IDFT of the permuted
// spectrum sampled at stride n/B, minus the dense circular convolution of the
// window with the permuted partial estimate.
CVec hash_to_bins_dense_oracle(const CVec& H_P,
                               const std::vector<std::pair<long, Complex>>& h_partial,
                               PermKind kind, const PermutationParams& p, const FlatWindow& w) {
    const long n = H_P.size();
    const CVec permuted = kind == PermKind::Exact ? permute_exact(H_P, p) : permute_approx(H_P, p);
    const CVec u = idft(w.freq.cwiseProduct(permuted), false);

    CVec partial_time = CVec::Zero(n);
    for (const auto& [t, v] : h_partial)
        partial_time[perm_time_index(kind, p, n, t)] += v * perm_time_phase(kind, p, n, t);
    const CVec sub = circular_convolve(partial_time, w.time);

    CVec out(w.B);
    const long stride = n / w.B;
    for (int j = 0; j < w.B; ++j) out[j] = u[stride * j] - sub[stride * j];
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("sifft");

TEST_CASE("exact permutation: identity parameters") {
    Rng rng(1);
    const CVec X = random_cvec(16, rng);
    const CVec Y = permute_exact(X, PermutationParams{1, 0, 0});
    CHECK((Y - X).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("exact permutation: n=4 hand-computable index map") {
    CVec X(4);
    X << Complex(10, 0), Complex(20, 0), Complex(30, 0), Complex(40, 0);
    // sigma=3, a=1, b=0: output_k = X_{(3k-1) mod 4} = [X3, X2, X1, X0]
    const CVec Y = permute_exact(X, PermutationParams{3, 1, 0});
    CHECK(Y[0] == X[3]);
    CHECK(Y[1] == X[2]);
    CHECK(Y[2] == X[1]);
    CHECK(Y[3] == X[0]);
}

TEST_CASE("exact permutation satisfies the time-domain re-indexing identity") {
    Rng rng(2);
    const long n = 64;
    const CVec X = random_cvec(n, rng);
    const CVec x = idft(X, false);
    for (int rep = 0; rep < 10; ++rep) {
        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(n));
        p.a = static_cast<long>(rng.uniform_u64(n));
        p.b = static_cast<long>(rng.uniform_u64(n));
        const CVec px = idft(permute_exact(X, p), false);
        for (long k = 0; k < n; ++k) {
            const Complex want = x[k] * perm_time_phase(PermKind::Exact, p, n, k);
            CHECK(std::abs(px[perm_time_index(PermKind::Exact, p, n, k)] - want) < 1e-10);
        }
    }
}

TEST_CASE("approx permutation: identity and hand map") {
    Rng rng(3);
    const CVec X = random_cvec(8, rng);
    CHECK((permute_approx(X, PermutationParams{1, 0, 0}) - X).cwiseAbs().maxCoeff() < 1e-15);
    // sigma=3, a=1, b=0: output_k = X_{3(k-1) mod 4} = [X1, X0, X3, X2]
    CVec X4(4);
    X4 << Complex(1, 0), Complex(2, 0), Complex(3, 0), Complex(4, 0);
    const CVec Y = permute_approx(X4, PermutationParams{3, 1, 0});
    CHECK(Y[0] == X4[1]);
    CHECK(Y[1] == X4[0]);
    CHECK(Y[2] == X4[3]);
    CHECK(Y[3] == X4[2]);
}

TEST_CASE("approx permutation satisfies the time-domain re-indexing identity") {
    Rng rng(4);
    const long n = 64;
    const CVec X = random_cvec(n, rng);
    const CVec x = idft(X, false);
    for (int rep = 0; rep < 10; ++rep) {
        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(n));
        p.a = static_cast<long>(rng.uniform_u64(n));
        p.b = static_cast<long>(rng.uniform_u64(n));
        const CVec px = idft(permute_approx(X, p), false);
        for (long k = 0; k < n; ++k) {
            const Complex want = x[k] * perm_time_phase(PermKind::Approx, p, n, k);
            CHECK(std::abs(px[perm_time_index(PermKind::Approx, p, n, k)] - want) < 1e-10);
        }
    }
}

TEST_CASE("permutation bijectivity and inverse map") {
    Rng rng(5);
    const long n = 256;
    for (int rep = 0; rep < 20; ++rep) {
        const long sigma = static_cast<long>(rng.odd_sigma(n));
        const long b = static_cast<long>(rng.uniform_u64(n));
        const long sigma_inv = mod_inverse_pow2(sigma, n);
        CHECK(imod(sigma * sigma_inv, n) == 1);
        std::set<long> seen;
        for (long t = 0; t < n; ++t) {
            const long q = perm_time_index(PermKind::Approx, PermutationParams{sigma, 0, b}, n, t);
            seen.insert(q);
            CHECK(imod(sigma_inv * q + b, n) == t);
        }
        CHECK(static_cast<long>(seen.size()) == n);
    }
    CHECK_THROWS_AS(permute_exact(CVec::Zero(8), PermutationParams{2, 0, 0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(permute_approx(CVec::Zero(8), PermutationParams{4, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("flat window: degenerate passband rejected") {
    CHECK_THROWS_AS(build_flat_window(256, 0.5, 1e-6, 256), config_error);
}

TEST_CASE("flat window meets its measured specs") {
    const FlatWindow w = build_flat_window(16, 0.25, 1e-6, 256);
    CHECK(w.stopband_peak <= 1e-6);
    CHECK(w.passband_ripple <= 1e-6);
    // direct evaluation against the declared bands
    const double t_pass = (1.0 - w.alpha) * 256.0 / (2 * 16);
    const double t_stop = 256.0 / (2 * 16);
    for (long t = 0; t < 256; ++t) {
        const double tau = std::abs(t <= 128 ? double(t) : double(t - 256));
        if (tau <= t_pass) CHECK(std::abs(w.time[t] - Complex(1, 0)) <= 1e-6);
        if (tau >= t_stop) CHECK(std::abs(w.time[t]) <= 1e-6);
    }
}

TEST_CASE("hash_to_bins matches the dense oracle") {
    Rng rng(6);
    const long n = 256;
    const FlatWindow w = build_flat_window(16, 0.25, 1e-8, n);
    const CVec H_P = random_cvec(n, rng);
    std::vector<std::pair<long, Complex>> partial = {{7, Complex(0.5, -0.25)},
                                                     {100, Complex(-1, 2)}};
    for (PermKind kind : {PermKind::Exact, PermKind::Approx}) {
        for (int rep = 0; rep < 5; ++rep) {
            PermutationParams p;
            p.sigma = static_cast<long>(rng.odd_sigma(n));
            p.a = static_cast<long>(rng.uniform_u64(n));
            p.b = static_cast<long>(rng.uniform_u64(n));
            const CVec got = hash_to_bins(H_P, partial, kind, p, w);
            const CVec want = hash_to_bins_dense_oracle(H_P, partial, kind, p, w);
            CHECK((got - want).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("hash_to_bins cancels a fully recovered tap") {
    Rng rng(7);
    const long n = 512;
    const FlatWindow w = build_flat_window(16, 0.25, 1e-9, n);
    const long coord = 137;
    const Complex val(0.8, -1.1);
    CVec h = CVec::Zero(n);
    h[coord] = val;
    const CVec H_P = dft(h, false);
    for (int rep = 0; rep < 8; ++rep) {
        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(n));
        p.a = rep % 2;
        p.b = static_cast<long>(rng.uniform_u64(n));
        const CVec bins = hash_to_bins(H_P, {{coord, val}}, PermKind::Exact, p, w);
        CHECK(bins.cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("hash_to_bins maps a single tap to its bin with unit gain") {
    Rng rng(8);
    const long n = 512;
    const int B = 16;
    const FlatWindow w = build_flat_window(B, 0.25, 1e-9, n);
    const long coord = 309;
    const Complex val(1.5, 0.7);
    CVec h = CVec::Zero(n);
    h[coord] = val;
    const CVec H_P = dft(h, false);
    int in_passband = 0;
    for (int rep = 0; rep < 20; ++rep) {
        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(n));
        p.a = 0;
        p.b = static_cast<long>(rng.uniform_u64(n));
        const CVec bins = hash_to_bins(H_P, {}, PermKind::Exact, p, w);
        const long q = perm_time_index(PermKind::Exact, p, n, coord);
        const int bin = static_cast<int>(imod(std::lround(double(B) * q / double(n)), B));
        for (int j = 0; j < B; ++j)
            if (j != bin) CHECK(std::abs(bins[j]) < 1e-6 * std::abs(val));
        const long off = imod(static_cast<long>(bin) * (n / B) - q, n);
        const double dist = std::abs(off <= n / 2 ? double(off) : double(off - n));
        if (dist <= (1 - w.alpha) * n / (2.0 * B)) {
            ++in_passband;
            CHECK(std::abs(bins[bin] - val) < 1e-6 * std::abs(val));
        }
    }
    CHECK(in_passband > 10);
}

TEST_CASE("hash_to_bins separates two taps hashed to distinct bins") {
    Rng rng(9);
    const long n = 512;
    const int B = 16;
    const FlatWindow w = build_flat_window(B, 0.25, 1e-9, n);
    CVec h = CVec::Zero(n);
    h[31] = Complex(1, 0);
    h[402] = Complex(0, -2);
    const CVec H_P = dft(h, false);
    int verified = 0;
    for (int rep = 0; rep < 40 && verified < 5; ++rep) {
        PermutationParams p;
        p.sigma = static_cast<long>(rng.odd_sigma(n));
        p.a = 0;
        p.b = static_cast<long>(rng.uniform_u64(n));
        const long q1 = perm_time_index(PermKind::Exact, p, n, 31);
        const long q2 = perm_time_index(PermKind::Exact, p, n, 402);
        const int b1 = static_cast<int>(imod(std::lround(double(B) * q1 / double(n)), B));
        const int b2 = static_cast<int>(imod(std::lround(double(B) * q2 / double(n)), B));
        auto off_ok = [&](long q, int b) {
            const long off = imod(static_cast<long>(b) * (n / B) - q, n);
            const double dist = std::abs(off <= n / 2 ? double(off) : double(off - n));
            return dist <= (1 - w.alpha) * n / (2.0 * B);
        };
        if (b1 == b2 || !off_ok(q1, b1) || !off_ok(q2, b2)) continue;
        const CVec bins = hash_to_bins(H_P, {}, PermKind::Exact, p, w);
        CHECK(std::abs(bins[b1] - h[31]) < 1e-6);
        CHECK(std::abs(bins[b2] - h[402]) < 1e-6);
        ++verified;
    }
    CHECK(verified == 5);
}

TEST_CASE("hash_to_bins is linear") {
    Rng rng(10);
    const long n = 256;
    const FlatWindow w = build_flat_window(8, 0.25, 1e-8, n);
    const CVec A = random_cvec(n, rng), B2 = random_cvec(n, rng);
    PermutationParams p{static_cast<long>(rng.odd_sigma(n)),
                        static_cast<long>(rng.uniform_u64(n)),
                        static_cast<long>(rng.uniform_u64(n))};
    const CVec wa = hash_to_bins(A, {}, PermKind::Approx, p, w);
    const CVec wb = hash_to_bins(B2, {}, PermKind::Approx, p, w);
    const CVec wab = hash_to_bins(A + B2, {}, PermKind::Approx, p, w);
    CHECK((wab - wa - wb).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exactly sparse recovery of a delta at zero") {
    Rng rng(11);
    const int M = 8, P = 64;
    CVec h = CVec::Zero(512);
    h[0] = Complex(3, -2);
    const CVec H_P = dft(h, false);
    const ChannelEstimate est = exactly_sparse_ifft(H_P, 1, M, P, SifftParams{}, rng);
    REQUIRE(est.entries.size() == 1);
    CHECK(est.entries[0].first == 0);
    CHECK(std::abs(est.entries[0].second - h[0]) < 1e-6);
    CHECK(!est.low_confidence);
}

TEST_CASE("exactly sparse estimate matches the dense oracle support and values") {
    Rng rng(12);
    const int M = 8, P = 64;
    const long n = static_cast<long>(M) * P;
    int successes = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        const SparseChannel ch = sample_sparse_channel(4, static_cast<int>(n) - 1, rng, true);
        const CVec htrue = ch.dense(n);
        const CVec H_P = dft(htrue, false);
        const ChannelEstimate est = exactly_sparse_ifft(H_P, 4, M, P, SifftParams{}, rng);
        VofdmConfig cfg{64, M, P, 0};
        const ChannelEstimate dense = dense_ifft_estimate(H_P, cfg);
        const auto want = dense.top_k_support(4);
        if (est.top_k_support(4) == want) {
            bool vals_ok = true;
            const CVec hd = dense.dense(n);
            for (const auto& [c, v] : est.entries)
                if (std::abs(v - hd[c]) > 1e-6) vals_ok = false;
            if (vals_ok) ++successes;
        }
    }
    MESSAGE("exact path success: ", successes, "/", trials);
    CHECK(successes >= 48);
}

TEST_CASE("subtraction consistency: converged estimate leaves cold bins") {
    Rng rng(13);
    const int M = 4, P = 64;
    const long n = 256;
    const SparseChannel ch = sample_sparse_channel(4, 200, rng, true);
    const CVec H_P = dft(ch.dense(n), false);
    SifftParams params;
    const ChannelEstimate est = exactly_sparse_ifft(H_P, 4, M, P, params, rng);
    REQUIRE(!est.low_confidence);

    const double scale = H_P.norm() / std::sqrt(double(n));
    const double delta = 0.05 * scale;
    const FlatWindow w = build_flat_window(16, 0.25, delta / (4.0 * n * n * 2.0 * scale), n);
    std::vector<std::pair<long, Complex>> partial;
    for (const auto& [c, v] : est.entries) partial.emplace_back(c, v);
    for (int rep = 0; rep < 4; ++rep) {
        PermutationParams p{static_cast<long>(rng.odd_sigma(n)), 0,
                            static_cast<long>(rng.uniform_u64(n))};
        const CVec bins = hash_to_bins(H_P, partial, PermKind::Exact, p, w);
        CHECK(bins.cwiseAbs().maxCoeff() < delta / 2);
    }
}

TEST_CASE("hash call count does not grow with n at fixed K") {
    Rng rng(14);
    std::vector<long> ns = {128, 256, 512, 1024, 2048};
    std::vector<double> calls;
    for (long n : ns) {
        double acc = 0;
        const int reps = 10;
        for (int t = 0; t < reps; ++t) {
            const SparseChannel ch = sample_sparse_channel(4, static_cast<int>(n) - 1, rng, true);
            const CVec H_P = dft(ch.dense(n), false);
            const ChannelEstimate est =
                exactly_sparse_ifft(H_P, 4, 4, static_cast<int>(n / 4), SifftParams{}, rng);
            acc += static_cast<double>(est.hash_to_bins_calls);
        }
        calls.push_back(acc / reps);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int m = static_cast<int>(ns.size());
    for (int i = 0; i < m; ++i) {
        const double x = std::log(double(ns[i])), y = std::log(calls[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    MESSAGE("call-count exponent vs n: ", slope);
    CHECK(std::abs(slope) < 0.2);
}

TEST_CASE("approximately sparse: noiseless input recovers the exact-path support") {
    Rng rng(15);
    const int M = 8, P = 64;
    const long n = 512;
    int agree = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        const SparseChannel ch = sample_sparse_channel(4, 200, rng, true);
        const CVec H_P = dft(ch.dense(n), false);
        Rng r1 = rng.substream(t), r2 = rng.substream(t + 1000);
        const ChannelEstimate exact = exactly_sparse_ifft(H_P, 4, M, P, SifftParams{}, r1);
        const ChannelEstimate approx = approximately_sparse_ifft(H_P, 4, M, P, SifftParams{}, r2);
        if (exact.top_k_support(4) == approx.top_k_support(4)) ++agree;
    }
    MESSAGE("noiseless approx/exact support agreement: ", agree, "/", trials);
    CHECK(agree >= 18);
}

TEST_CASE("approximately sparse under noise tracks the dense estimator") {
    Rng rng(16);
    const int M = 8, P = 64;
    const long n = 512;
    const double sigma2 = 0.01;  // 20 dB
    int support_match = 0;
    double rmse_acc = 0;
    const int trials = 30;
    for (int t = 0; t < trials; ++t) {
        const SparseChannel ch = sample_sparse_channel(4, 200, rng, true);
        const CVec htrue = ch.dense(n);
        CVec H_P = dft(htrue, false);
        for (long i = 0; i < n; ++i) H_P[i] += rng.cnormal(sigma2);
        const ChannelEstimate est = approximately_sparse_ifft(H_P, 4, M, P, SifftParams{}, rng);
        VofdmConfig cfg{64, M, P, 0};
        const ChannelEstimate dense = dense_ifft_estimate(H_P, cfg);
        if (est.top_k_support(4) == dense.top_k_support(4)) ++support_match;
        rmse_acc += (est.dense(n) - htrue).norm() / std::sqrt(double(n));
    }
    MESSAGE("support match ", support_match, "/", trials, ", mean RMSE ", rmse_acc / trials);
    CHECK(support_match >= 27);
    CHECK(rmse_acc / trials < 0.01);
}

TEST_CASE("eta sentinel for the exactly sparse case") {
    Rng rng(17);
    const long n = 256;
    const SparseChannel ch = sample_sparse_channel(3, 100, rng, true);
    const CVec H_P = dft(ch.dense(n), false);
    const ChannelEstimate est = exactly_sparse_ifft(H_P, 3, 4, 64, SifftParams{}, rng);
    REQUIRE(est.eta.has_value());
    CHECK(*est.eta > 1e9);
}

TEST_SUITE_END();
