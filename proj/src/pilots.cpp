#include "vofdm/pilots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "vofdm/numerics.hpp"
#include "vofdm/rng.hpp"

namespace vofdm {

std::vector<int> pilot_indices(int L, int P) {
    if (P < 1 || L % P != 0) throw std::invalid_argument("pilot_indices: P must divide L");
    std::vector<int> idx(P);
    for (int p = 0; p < P; ++p) idx[p] = p * (L / P);
    return idx;
}

namespace {
constexpr double kNullThreshold = 1e-12;
}

CVec ls_estimate_cfr(const VectorBlock& Y_l, const VectorBlock& X_l, int l,
                     const VofdmConfig& cfg) {
    if (Y_l.symbols.size() != cfg.M || X_l.symbols.size() != cfg.M)
        throw std::invalid_argument("ls_estimate_cfr: VB size mismatch");
    const CMat U = unitary_U(l, cfg);
    const CVec Xt = U * X_l.symbols;
    const CVec Yt = U * Y_l.symbols;
    CVec H(cfg.M);
    for (int m = 0; m < cfg.M; ++m) {
        if (std::abs(Xt[m]) < kNullThreshold)
            throw spectral_null_error("ls_estimate_cfr: symbol spectral null at l=" +
                                      std::to_string(l) + ", m=" + std::to_string(m));
        H[m] = Yt[m] / Xt[m];
    }
    return H;
}

double pilot_mse(const CVec& pilot, int l_p, const VofdmConfig& cfg) {
    if (pilot.size() != cfg.M) throw std::invalid_argument("pilot_mse: VB size mismatch");
    const CVec Xt = unitary_U(l_p, cfg) * pilot;
    double acc = 0;
    for (int m = 0; m < cfg.M; ++m) {
        const double a2 = std::norm(Xt[m]);
        if (a2 < kNullThreshold * kNullThreshold)
            throw spectral_null_error("pilot_mse: spectral null at l_p=" + std::to_string(l_p));
        acc += 1.0 / a2;
    }
    return acc / cfg.M;
}

namespace {

// Objective with nulls mapped to +inf instead of a throw, for search loops.
double mse_or_inf(const CVec& x, const CMat& U, int M) {
    const CVec Xt = U * x;
    double acc = 0;
    for (int m = 0; m < M; ++m) {
        const double a2 = std::norm(Xt[m]);
        if (a2 < 1e-24) return std::numeric_limits<double>::infinity();
        acc += 1.0 / a2;
    }
    return acc / M;
}

CVec bits_to_vb(const Constellation& cs, std::uint64_t bits, int M) {
    CVec x(M);
    for (int m = 0; m < M; ++m) x[m] = cs.points[(bits >> m) & (cs.points.size() - 1)];
    return x;
}

std::pair<CVec, double> search_pilot_exhaustive(const CMat& U, const VofdmConfig& cfg) {
    // Sign symmetry: sigma^2 is invariant under global negation, fix the first
    // symbol (BPSK) / first index bit otherwise just sweep the full alphabet.
    const bool bpsk = cfg.constellation.size() == 2;
    const int M = cfg.M;
    const std::uint64_t total =
        bpsk ? (1ull << (M - 1)) : (1ull << (cfg.constellation.bits() * M));
    CVec best;
    double best_v = std::numeric_limits<double>::infinity();
    for (std::uint64_t code = 0; code < total; ++code) {
        const CVec x = bpsk ? bits_to_vb(cfg.constellation, code << 1, M)
                            : bits_to_vb(cfg.constellation, code, M);
        const double v = mse_or_inf(x, U, M);
        if (v < best_v) {
            best_v = v;
            best = x;
        }
    }
    return {best, best_v};
}

std::pair<CVec, double> search_pilot_stochastic(const CMat& U, const VofdmConfig& cfg) {
    const int M = cfg.M;
    const int Q = cfg.constellation.size();
    Rng rng(0x9114a7ull);  // fixed seed: the plan must be reproducible
    CVec best;
    double best_v = std::numeric_limits<double>::infinity();
    for (int restart = 0; restart < 32; ++restart) {
        std::vector<int> idx(M);
        for (int m = 0; m < M; ++m) idx[m] = static_cast<int>(rng.uniform_u64(Q));
        auto vb = [&]() {
            CVec x(M);
            for (int m = 0; m < M; ++m) x[m] = cfg.constellation.points[idx[m]];
            return x;
        };
        double cur = mse_or_inf(vb(), U, M);
        bool improved = true;
        while (improved) {
            improved = false;
            for (int m = 0; m < M; ++m) {
                const int keep = idx[m];
                int best_q = keep;
                for (int q = 0; q < Q; ++q) {
                    if (q == keep) continue;
                    idx[m] = q;
                    const double v = mse_or_inf(vb(), U, M);
                    if (v < cur) {
                        cur = v;
                        best_q = q;
                        improved = true;
                    }
                }
                idx[m] = best_q;
            }
        }
        if (cur < best_v) {
            best_v = cur;
            best = vb();
        }
    }
    return {best, best_v};
}

}  // namespace

PilotPlan design_pilots(const VofdmConfig& cfg) {
    cfg.validate();
    PilotPlan plan;
    plan.indices = pilot_indices(cfg.L, cfg.P);
    for (int l_p : plan.indices) {
        const CMat U = unitary_U(l_p, cfg);
        auto [x, v] =
            cfg.M <= 16 ? search_pilot_exhaustive(U, cfg) : search_pilot_stochastic(U, cfg);
        plan.symbols.push_back(x);
        plan.mse.push_back(v);
    }
    return plan;
}

CVec assemble_cfr_samples(const std::vector<CVec>& per_pilot) {
    const int P = static_cast<int>(per_pilot.size());
    if (P == 0) throw std::invalid_argument("assemble_cfr_samples: no pilots");
    const int M = static_cast<int>(per_pilot[0].size());
    CVec H_P(static_cast<long>(M) * P);
    for (int p = 0; p < P; ++p) {
        if (per_pilot[p].size() != M)
            throw std::invalid_argument("assemble_cfr_samples: ragged per-pilot estimates");
        for (int m = 0; m < M; ++m) H_P[pilot_frequency_slot(m, p, P)] = per_pilot[p][m];
    }
    return H_P;
}

CVec ChannelEstimate::dense(long n) const {
    CVec h = CVec::Zero(n);
    for (const auto& [c, v] : entries) {
        if (c < 0 || c >= n) throw std::invalid_argument("ChannelEstimate::dense: coord out of range");
        h[c] = v;
    }
    return h;
}

std::vector<int> ChannelEstimate::support() const {
    std::vector<int> s;
    s.reserve(entries.size());
    for (const auto& [c, v] : entries) s.push_back(c);
    return s;
}

std::vector<int> ChannelEstimate::top_k_support(int k) const {
    std::vector<std::pair<double, int>> mag;
    mag.reserve(entries.size());
    for (const auto& [c, v] : entries) mag.emplace_back(std::norm(v), c);
    std::sort(mag.begin(), mag.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> out;
    for (int i = 0; i < std::min<int>(k, static_cast<int>(mag.size())); ++i)
        out.push_back(mag[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

ChannelEstimate dense_ifft_estimate(const CVec& H_P, const VofdmConfig& cfg) {
    if (H_P.size() != static_cast<long>(cfg.M) * cfg.P)
        throw std::invalid_argument("dense_ifft_estimate: H_P must have length M*P");
    const CVec h = idft(H_P, /*normalized=*/false);
    ChannelEstimate est;
    est.source = EstimateSource::DenseIfft;
    est.entries.reserve(h.size());
    for (long i = 0; i < h.size(); ++i) est.entries.emplace_back(static_cast<int>(i), h[i]);
    return est;
}

double eta(const CVec& h_hat, int K) {
    if (K < 0 || K > h_hat.size()) throw std::invalid_argument("eta: K out of range");
    std::vector<double> p(h_hat.size());
    for (long i = 0; i < h_hat.size(); ++i) p[i] = std::norm(h_hat[i]);
    std::sort(p.begin(), p.end(), std::greater<>());
    double top = 0, rest = 0;
    for (long i = 0; i < static_cast<long>(p.size()); ++i) (i < K ? top : rest) += p[i];
    if (rest == 0) return std::numeric_limits<double>::infinity();
    return top / rest;
}

std::vector<int> top_k_coords(const CVec& v, int k) {
    std::vector<std::pair<double, int>> mag(v.size());
    for (long i = 0; i < v.size(); ++i) mag[i] = {std::norm(v[i]), static_cast<int>(i)};
    std::sort(mag.begin(), mag.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    std::vector<int> out;
    for (int i = 0; i < std::min<long>(k, v.size()); ++i) out.push_back(mag[i].second);
    std::sort(out.begin(), out.end());
    return out;
}

void save_pilot_plan(std::ostream& os, const PilotPlan& plan) {
    os.precision(10);
    for (int p = 0; p < plan.count(); ++p) {
        os << plan.indices[p];
        for (long m = 0; m < plan.symbols[p].size(); ++m) {
            const Complex s = plan.symbols[p][m];
            // BPSK plans are the common case; keep them human-readable.
            if (s.imag() == 0 && (s.real() == 1 || s.real() == -1))
                os << "  " << (s.real() > 0 ? "+1" : "-1");
            else
                os << "  (" << s.real() << "," << s.imag() << ")";
        }
        os << "  " << plan.mse[p] << "\n";
    }
}

PilotPlan load_pilot_plan(std::istream& is, const VofdmConfig& cfg) {
    PilotPlan plan;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        int lp;
        if (!(ls >> lp)) throw config_error("pilot file: bad VB index");
        CVec x(cfg.M);
        for (int m = 0; m < cfg.M; ++m) {
            std::string tok;
            if (!(ls >> tok)) throw config_error("pilot file: truncated symbol list");
            if (tok == "+1")
                x[m] = Complex(1, 0);
            else if (tok == "-1")
                x[m] = Complex(-1, 0);
            else {
                double re, im;
                if (std::sscanf(tok.c_str(), "(%lf,%lf)", &re, &im) != 2)
                    throw config_error("pilot file: bad symbol token '" + tok + "'");
                x[m] = Complex(re, im);
            }
        }
        double sigma2;
        if (!(ls >> sigma2)) sigma2 = pilot_mse(x, lp, cfg);
        plan.indices.push_back(lp);
        plan.symbols.push_back(x);
        plan.mse.push_back(sigma2);
    }
    if (plan.indices.empty()) throw config_error("pilot file: empty");
    return plan;
}

}  // namespace vofdm
