#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "vofdm/rng.hpp"
#include "vofdm/types.hpp"

namespace vofdm {

/// K nonzero complex taps at distinct delays within [0, D].
struct SparseChannel {
    struct Tap {
        int delay;
        Complex value;
    };

    std::vector<Tap> taps;  // sorted by delay, values nonzero
    int max_delay = 0;      // D

    int tap_count() const { return static_cast<int>(taps.size()); }

    std::vector<int> coords() const;  // the delay set J, ascending

    /// Zero-padded CIR of length n (requires n > max tap delay).
    CVec dense(long n) const;

    double l2_norm() const;
    void normalize();  // scale to ||h||_2 = 1
};

struct NoiseSpec {
    double variance = 0.0;  // sigma^2; snr rho = 1/sigma^2 by construction

    double snr() const { return 1.0 / variance; }
    double snr_db() const { return 10.0 * std::log10(snr()); }

    static NoiseSpec noiseless() { return NoiseSpec{0.0}; }
    static NoiseSpec from_snr_db(double rho_db) {
        return NoiseSpec{std::pow(10.0, -rho_db / 10.0)};
    }
};

/// K distinct delays uniform over {0..D}, values iid CN(0,1).
/// force_zero_tap pins one tap at delay 0 (the Fig. 5 channels all contain it).
SparseChannel sample_sparse_channel(int K, int D, Rng& rng, bool normalize = false,
                                    bool force_zero_tap = false);

/// Linear convolution of the CP-extended sequence with h, CP removal, AWGN.
/// x_cp has length N + cp_len; the result has length N.
CVec transmit(const CVec& x_cp, int cp_len, const SparseChannel& h, const NoiseSpec& noise,
              Rng& rng);

/// I = {j mod M : j in J} ascending, and kappa = |I|.
std::pair<std::vector<int>, int> kappa(const std::vector<int>& coords, int M);
std::pair<std::vector<int>, int> kappa(const SparseChannel& h, int M);

/// The paper's closed-form mass function of kappa, normalized to sum 1.
/// As printed it is not a distribution; see kappa_pmf_exact for the occupancy law
/// that Monte Carlo actually follows.
RVec kappa_pmf(int K, int M);

/// Exact occupancy law for K iid uniform residues over M bins:
/// P(kappa) = C(M,kappa) * S2(K,kappa) * kappa! / M^K.
RVec kappa_pmf_exact(int K, int M);

/// Plain-text record: "D K" header then one "j re im" line per tap.
void save_channel(std::ostream& os, const SparseChannel& h);
SparseChannel load_channel(std::istream& is);

}  // namespace vofdm
