#pragma once

#include <vector>

#include "vofdm/modem.hpp"

namespace vofdm {

enum class DecoderKind { ZF, MMSE, ML, PIS };
enum class RadiusPolicy { Fixed, Formula, RobustFloor };
enum class ErasurePolicy { ExpandRadius, DeclareErasure };

struct DecoderConfig {
    DecoderKind kind = DecoderKind::PIS;
    NoiseSpec noise;

    RadiusPolicy radius_policy = RadiusPolicy::Formula;
    double fixed_radius = 0;     // used by RadiusPolicy::Fixed
    double rho0_db = 20.0;       // floor SNR for RadiusPolicy::RobustFloor

    ErasurePolicy erasure_policy = ErasurePolicy::ExpandRadius;
    double expand_factor = 2.0;
    int max_retries = 4;
};

struct DecodeResult {
    VectorBlock symbols;
    std::vector<int> indices;          // constellation indices of the decision
    std::vector<int> candidate_trace;  // |X^(m)| after each PIS iteration
    double radius_used = 0;
    bool erasure = false;
    double distance = 0;  // final l2 residual of the decision
};

/// r per Eq. (36): sqrt((kappa/rho) ln rho), optionally floored at rho_0.
double sphere_radius(double rho, int kappa, RadiusPolicy policy, double fixed_r = 0,
                     double rho0 = 100.0);

DecodeResult zf_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                       const Constellation& cs);
DecodeResult mmse_decode(const VectorBlock& Y, const BlockedChannelMatrix& H, double sigma2,
                         const Constellation& cs);
DecodeResult ml_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                       const Constellation& cs);

/// Candidate VB sequences surviving the per-row sphere tests and the
/// partial-intersection bookkeeping of the PIS iteration, as constellation
/// index sequences in deterministic (construction) order. Reads only the
/// kappa sparse entries per matrix row.
std::vector<std::vector<int>> pis_candidate_set(const VectorBlock& Y,
                                                const BlockedChannelMatrix& H, double r,
                                                const Constellation& cs,
                                                std::vector<int>* trace = nullptr);

/// Partial-intersection sphere decoding with the configured radius and erasure
/// policy. On candidate-set extinction: doubles the radius up to max_retries
/// (ExpandRadius) or falls straight through (DeclareErasure); after that the
/// result is flagged as an erasure and carries ZF-sliced symbols.
DecodeResult pis_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                        const DecoderConfig& cfg, const Constellation& cs);

/// True iff the true transmitted VB would survive the candidate construction at
/// radius r (equivalently: every row residual of the truth is within r).
bool pis_membership(const VectorBlock& Y, const BlockedChannelMatrix& H, const CVec& X_true,
                    double r);

/// Numerical rank of the M x K matrix [F]_{r,c} = e^{-j2pi(l + rL) j_c / N};
/// equals kappa for every data subchannel (Appendix-B law).
int diversity_rank_check(const SparseChannel& h, const VofdmConfig& cfg, int l);

/// Eq. (33) model: P_PIS(r) = (1-e^{-r^2/s^2})^M P_cond + 1 - (1-e^{-r^2/s^2})^M.
double ser_pis_model(double r, double sigma2, int M, double p_cond);

}  // namespace vofdm
