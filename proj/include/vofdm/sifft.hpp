#pragma once

#include <map>
#include <utility>
#include <vector>

#include "vofdm/pilots.hpp"
#include "vofdm/rng.hpp"

namespace vofdm {

/// Spectral permutation P_{sigma,a,b}. sigma must be odd (coprime with the
/// power-of-two length); a and b in [0, n).
struct PermutationParams {
    long sigma = 1;
    long a = 0;
    long b = 0;
};

/// Which of the two permutation definitions applies: the exactly-sparse path's
/// P(X)_k = X_{(sigma k - a) mod n} e^{j2pi b k/n}, or the approximately-sparse
/// path's P(X)_k = X_{sigma(k-a) mod n} e^{j2pi sigma b k/n}.
enum class PermKind { Exact, Approx };

CVec permute_exact(const CVec& X, const PermutationParams& p);
CVec permute_approx(const CVec& X, const PermutationParams& p);

/// Where a time-domain tap at coordinate t lands after the permutation, and the
/// modulation phase it picks up there (Eqs. 22 / 25).
long perm_time_index(PermKind kind, const PermutationParams& p, long n, long t);
Complex perm_time_phase(PermKind kind, const PermutationParams& p, long n, long t);

/// Multiplicative inverse of odd sigma modulo the power of two n.
long mod_inverse_pow2(long sigma, long n);

/// Gaussian-smoothed boxcar window. freq (G) multiplies the spectrum and is
/// support-limited; time (g = IDFT(G)) is flat within eps over the central
/// (1-alpha) n/B samples and below eps beyond +-n/(2B).
struct FlatWindow {
    long n = 0;
    int B = 0;
    double alpha = 0;
    double eps = 0;
    CVec freq;           // G, length n, zero outside the support
    CVec time;           // g, length n, reference for the subtraction step
    long support = 0;    // count of nonzero freq samples (the sample cost per hash)
    double passband_ripple = 0;  // measured
    double stopband_peak = 0;    // measured
};

FlatWindow build_flat_window(int B, double alpha, double eps, long n);

/// Knobs for both SIFFT paths. Zeros mean "derive the documented default".
struct SifftParams {
    // shared
    double delta = 0;  // resolution; default 0.05 ||H_P||_2 / sqrt(n)
    double Delta = 0;  // magnitude bound; default 2 ||H_P||_2 / sqrt(n)
    bool compute_residual = true;

    // exactly sparse path
    int b_factor = 4;       // B = next_pow2(b_factor * k)
    double alpha0 = 0.25;   // halved each round
    int retries = 8;        // extra coordinate/value rounds if bins stay hot
    int value_reps = 3;     // final gain-corrected value medians

    // approximately sparse path
    int t_outer = 0;            // T_A; 0 -> derived from K
    int b_factor_approx = 8;    // B_t = next_pow2(b_factor_approx * K / (t+1)^6)
    double alpha0_approx = 0.25;  // alpha_t = alpha0_approx / (t+1)^4
    int t_value_min = 5;        // lower bound on T_V (forced odd)
};

struct HashStats {
    long calls = 0;
    long samples = 0;
};

/// One HashToBins evaluation: permute and window the spectrum, alias into B
/// bins, take the (1/n-scaled) B-point inverse transform, and subtract the
/// contribution of the already-recovered taps. Bin j then samples
/// [g * p(h_residual)] at time (n/B) j exactly.
CVec hash_to_bins(const CVec& H_P, const std::vector<std::pair<long, Complex>>& h_partial,
                  PermKind kind, const PermutationParams& p, const FlatWindow& w,
                  HashStats* stats = nullptr);

/// Algorithm for the noiseless K-sparse CIR: 1 + log2 K peeling rounds, each
/// recovering coordinates from the a=0 / a=1 phase difference, followed by a
/// residual check with retry budget and a gain-corrected value pass.
ChannelEstimate exactly_sparse_ifft(const CVec& H_P, int K, int M, int P,
                                    const SifftParams& params, Rng& rng);

/// Algorithm for the noisy (approximately K-sparse) CIR: T_A rounds of
/// region-narrowing coordinate voting (Coordinate/Range) plus median value
/// estimation over randomized hashings (Value).
ChannelEstimate approximately_sparse_ifft(const CVec& H_P, int K, int M, int P,
                                          const SifftParams& params, Rng& rng);

}  // namespace vofdm
