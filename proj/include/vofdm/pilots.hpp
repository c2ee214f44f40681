#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "vofdm/modem.hpp"

namespace vofdm {

/// Evenly spaced pilot VB indices l_p = p L / P.
std::vector<int> pilot_indices(int L, int P);

/// Least-squares CFR samples for subchannel l: elementwise (U_l Y) / (U_l X).
/// Entry m estimates H_{l + m L}. Throws spectral_null_error if |[U_l X]_m| < 1e-12.
CVec ls_estimate_cfr(const VectorBlock& Y_l, const VectorBlock& X_l, int l,
                     const VofdmConfig& cfg);

/// Normalized estimator MSE sigma^2_{l_p} = (1/M) sum_m |[U_{l_p} X]_m|^{-2};
/// >= 1 by Parseval for unit-modulus symbols.
double pilot_mse(const CVec& pilot, int l_p, const VofdmConfig& cfg);

struct PilotPlan {
    std::vector<int> indices;   // l_p, ascending
    std::vector<CVec> symbols;  // one VB of M symbols per pilot
    std::vector<double> mse;    // sigma^2_{l_p}

    int count() const { return static_cast<int>(indices.size()); }
};

/// Per-pilot independent minimization of sigma^2_{l_p} over the constellation^M.
/// Exhaustive with sign-symmetry reduction for M <= 16; greedy multi-restart
/// local search (fixed seed) above.
PilotPlan design_pilots(const VofdmConfig& cfg);

/// Position of the CFR sample estimated by pilot p, component m, in the
/// natural-frequency-order vector H_P of Eq. (14): H_P[m P + p] = H_{l_p + m L}.
inline long pilot_frequency_slot(int m, int p, int P) { return static_cast<long>(m) * P + p; }

/// Interleave per-pilot LS estimates (index p, each of length M) into H_P (length M P).
CVec assemble_cfr_samples(const std::vector<CVec>& per_pilot);

enum class EstimateSource { DenseIfft, SifftExact, SifftApprox };

/// Sparse (coordinate, value) CIR estimate plus estimation metadata.
struct ChannelEstimate {
    std::vector<std::pair<int, Complex>> entries;  // coords distinct, ascending
    EstimateSource source = EstimateSource::DenseIfft;
    std::optional<double> eta;       // measured K-dominance power ratio
    std::optional<double> residual;  // ||H_P - FFT(h_hat)||_2
    bool low_confidence = false;

    // SIFFT diagnostics (zero for the dense path)
    long hash_to_bins_calls = 0;
    long cfr_samples_read = 0;
    int rounds = 0;

    CVec dense(long n) const;
    std::vector<int> support() const;

    /// Coordinates of the k largest-magnitude entries, ascending.
    std::vector<int> top_k_support(int k) const;
};

/// Eq. (18): h_hat = F^{-1}_{MP} H_P / sqrt(MP), the dense baseline estimator.
ChannelEstimate dense_ifft_estimate(const CVec& H_P, const VofdmConfig& cfg);

/// Power ratio of the K largest-magnitude entries to the rest; +inf when the
/// residual power is zero (the exactly sparse case).
double eta(const CVec& h_hat, int K);

/// Coordinates of the k largest-magnitude entries of a dense vector, ascending.
std::vector<int> top_k_coords(const CVec& v, int k);

/// One line per pilot VB: "l_p  s_0 ... s_{M-1}  sigma2" (BPSK symbols as +1/-1).
void save_pilot_plan(std::ostream& os, const PilotPlan& plan);
PilotPlan load_pilot_plan(std::istream& is, const VofdmConfig& cfg);

}  // namespace vofdm
