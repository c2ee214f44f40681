#include "vofdm/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace vofdm {

double sphere_radius(double rho, int kappa, RadiusPolicy policy, double fixed_r, double rho0) {
    if (policy == RadiusPolicy::Fixed) {
        if (fixed_r <= 0) throw std::invalid_argument("sphere_radius: fixed radius must be > 0");
        return fixed_r;
    }
    if (rho <= 1.0) throw std::invalid_argument("sphere_radius: need rho > 1");
    const double base = std::sqrt(kappa / rho * std::log(rho));
    if (policy == RadiusPolicy::Formula) return base;
    if (rho0 <= 1.0) throw std::invalid_argument("sphere_radius: need rho0 > 1");
    return std::max(base, std::sqrt(kappa / rho0 * std::log(rho0)));
}

namespace {

DecodeResult slice_result(const VectorBlock& Y, const BlockedChannelMatrix& H, const CVec& soft,
                          const Constellation& cs) {
    const int M = H.vb_size();
    DecodeResult res;
    res.symbols.index = Y.index;
    res.symbols.symbols = CVec(M);
    res.indices.resize(M);
    for (int m = 0; m < M; ++m) {
        res.indices[m] = cs.slice_index(soft[m]);
        res.symbols.symbols[m] = cs.points[res.indices[m]];
    }
    res.distance = (Y.symbols - H.dense() * res.symbols.symbols).norm();
    return res;
}

}  // namespace

DecodeResult zf_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                       const Constellation& cs) {
    const CMat Hd = H.dense();
    Eigen::JacobiSVD<CMat> svd(Hd, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smin <= 0 || smax / smin > 1e12)
        throw singular_channel_error("zf_decode: channel matrix numerically singular");
    const CVec soft = svd.solve(Y.symbols);
    return slice_result(Y, H, soft, cs);
}

DecodeResult mmse_decode(const VectorBlock& Y, const BlockedChannelMatrix& H, double sigma2,
                         const Constellation& cs) {
    if (sigma2 < 0) throw std::invalid_argument("mmse_decode: negative noise variance");
    const CMat Hd = H.dense();
    const int M = H.vb_size();
    const CMat A = Hd.adjoint() * Hd + sigma2 * CMat::Identity(M, M);
    const CVec soft = A.ldlt().solve(Hd.adjoint() * Y.symbols);
    return slice_result(Y, H, soft, cs);
}

DecodeResult ml_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                       const Constellation& cs) {
    const int M = H.vb_size();
    const int R = cs.bits();
    if (R * M > 24) throw budget_error("ml_decode: constellation^M too large to enumerate");
    const CMat Hd = H.dense();

    std::vector<int> idx(M, 0), best_idx;
    CVec X(M);
    double best = std::numeric_limits<double>::infinity();
    const long total = 1L << (R * M);
    for (long code = 0; code < total; ++code) {
        // big-endian digit order: ascending code enumerates the symbol
        // sequences in lexicographic order, so strict < breaks ties low
        for (int m = 0; m < M; ++m) {
            idx[m] = static_cast<int>(code >> (R * (M - 1 - m)) & ((1 << R) - 1));
            X[m] = cs.points[idx[m]];
        }
        const double d = (Y.symbols - Hd * X).squaredNorm();
        if (d < best) {
            best = d;
            best_idx = idx;
        }
    }

    DecodeResult res;
    res.symbols.index = Y.index;
    res.symbols.symbols = CVec(M);
    res.indices = best_idx;
    for (int m = 0; m < M; ++m) res.symbols.symbols[m] = cs.points[best_idx[m]];
    res.distance = std::sqrt(best);
    return res;
}

namespace {

// Candidate partial assignment over the coordinates seen so far.
struct Partial {
    std::vector<int> idx;    // constellation index per coordinate (valid where assigned)
    std::uint64_t mask = 0;  // assigned coordinates
};

}  // namespace

std::vector<std::vector<int>> pis_candidate_set(const VectorBlock& Y,
                                                const BlockedChannelMatrix& H, double r,
                                                const Constellation& cs,
                                                std::vector<int>* trace) {
    const int M = H.vb_size();
    const int kap = H.kappa();
    const int Q = cs.size();
    if (M > 63) throw std::invalid_argument("pis_candidate_set: M too large for mask bookkeeping");
    if (r <= 0) throw std::invalid_argument("pis_candidate_set: radius must be > 0");

    if (trace) trace->clear();
    std::vector<Partial> cur{Partial{std::vector<int>(M, 0), 0}};
    std::uint64_t known = 0;  // U^(m)

    std::vector<Complex> row(kap);
    std::vector<int> cols(kap);
    std::vector<int> sphere;       // flat: sphere sequences, kap indices each
    std::vector<Partial> next;

    for (int m = 0; m < M && !cur.empty(); ++m) {
        std::uint64_t vmask = 0;
        for (int k = 0; k < kap; ++k) {
            cols[k] = H.col(m, k);
            row[k] = H.entry(m, k);
            vmask |= 1ull << cols[k];
        }
        const std::uint64_t wmask = known & vmask;  // partial intersection W^(m)

        // S^(m): kappa-symbol sequences within r of the m-th received entry
        sphere.clear();
        std::vector<int> s(kap, 0);
        long count = 1;
        for (int k = 0; k < kap; ++k) count *= Q;
        for (long code = 0; code < count; ++code) {
            long c = code;
            Complex acc = 0;
            for (int k = 0; k < kap; ++k) {
                s[k] = static_cast<int>(c % Q);
                c /= Q;
                acc += row[k] * cs.points[s[k]];
            }
            if (std::abs(Y.symbols[m] - acc) <= r)
                for (int k = 0; k < kap; ++k) sphere.push_back(s[k]);
        }

        next.clear();
        const long n_sphere = static_cast<long>(sphere.size()) / kap;
        for (long si = 0; si < n_sphere; ++si) {
            const int* S = sphere.data() + si * kap;
            for (const Partial& X : cur) {
                bool ok = true;
                for (int k = 0; k < kap && ok; ++k)
                    if (wmask >> cols[k] & 1) ok = X.idx[cols[k]] == S[k];
                if (!ok) continue;
                Partial child = X;
                for (int k = 0; k < kap; ++k)
                    if (!(wmask >> cols[k] & 1)) {
                        child.idx[cols[k]] = S[k];
                        child.mask |= 1ull << cols[k];
                    }
                next.push_back(std::move(child));
            }
        }
        cur.swap(next);
        known |= vmask;
        if (trace) trace->push_back(static_cast<int>(cur.size()));
    }

    std::vector<std::vector<int>> out;
    out.reserve(cur.size());
    for (const Partial& X : cur) out.push_back(X.idx);
    return out;
}

bool pis_membership(const VectorBlock& Y, const BlockedChannelMatrix& H, const CVec& X_true,
                    double r) {
    const int M = H.vb_size();
    for (int m = 0; m < M; ++m) {
        Complex acc = 0;
        for (int k = 0; k < H.kappa(); ++k) acc += H.entry(m, k) * X_true[H.col(m, k)];
        if (std::abs(Y.symbols[m] - acc) > r) return false;
    }
    return true;
}

DecodeResult pis_decode(const VectorBlock& Y, const BlockedChannelMatrix& H,
                        const DecoderConfig& cfg, const Constellation& cs) {
    const int M = H.vb_size();
    const int kap = H.kappa();
    double r = sphere_radius(cfg.noise.snr(), kap, cfg.radius_policy, cfg.fixed_radius,
                             NoiseSpec::from_snr_db(cfg.rho0_db).snr());

    const int attempts = cfg.erasure_policy == ErasurePolicy::ExpandRadius ? cfg.max_retries + 1 : 1;
    std::vector<int> trace;
    std::vector<std::vector<int>> cands;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        cands = pis_candidate_set(Y, H, r, cs, &trace);
        if (!cands.empty()) break;
        if (attempt + 1 < attempts) r *= cfg.expand_factor;
    }

    if (cands.empty()) {
        // erasure: ZF-sliced fallback keeps the BER accounting finite
        DecodeResult res;
        try {
            res = zf_decode(Y, H, cs);
        } catch (const singular_channel_error&) {
            res.symbols.index = Y.index;
            res.symbols.symbols = CVec::Constant(M, cs.points[0]);
            res.indices.assign(M, 0);
            res.distance = (Y.symbols - H.dense() * res.symbols.symbols).norm();
        }
        res.erasure = true;
        res.radius_used = r;
        res.candidate_trace = trace;
        return res;
    }

    // final selection: minimum residual over the candidate set, computed from
    // the kappa sparse entries per row; lexicographic tie-break
    double best = std::numeric_limits<double>::infinity();
    const std::vector<int>* best_cand = nullptr;
    for (const auto& cand : cands) {
        double d2 = 0;
        for (int m = 0; m < M; ++m) {
            Complex acc = 0;
            for (int k = 0; k < kap; ++k) acc += H.entry(m, k) * cs.points[cand[H.col(m, k)]];
            d2 += std::norm(Y.symbols[m] - acc);
        }
        if (d2 < best || (d2 == best && best_cand && cand < *best_cand)) {
            best = d2;
            best_cand = &cand;
        }
    }

    DecodeResult res;
    res.symbols.index = Y.index;
    res.symbols.symbols = CVec(M);
    res.indices = *best_cand;
    for (int m = 0; m < M; ++m) res.symbols.symbols[m] = cs.points[res.indices[m]];
    res.candidate_trace = trace;
    res.radius_used = r;
    res.distance = std::sqrt(best);
    return res;
}

int diversity_rank_check(const SparseChannel& h, const VofdmConfig& cfg, int l) {
    const int M = cfg.M;
    const int K = h.tap_count();
    const double N = static_cast<double>(cfg.N());
    CMat F(M, K);
    for (int r = 0; r < M; ++r)
        for (int c = 0; c < K; ++c)
            F(r, c) = std::polar(1.0, -kTwoPi * (l + static_cast<double>(r) * cfg.L) *
                                          h.taps[c].delay / N);
    Eigen::JacobiSVD<CMat> svd(F);
    const auto& sv = svd.singularValues();
    const double thresh = std::max(M, K) * std::numeric_limits<double>::epsilon() * sv(0);
    int rank = 0;
    for (long i = 0; i < sv.size(); ++i)
        if (sv(i) > thresh) ++rank;
    return rank;
}

double ser_pis_model(double r, double sigma2, int M, double p_cond) {
    const double inside = std::pow(1.0 - std::exp(-r * r / sigma2), M);
    return inside * p_cond + 1.0 - inside;
}

}  // namespace vofdm
