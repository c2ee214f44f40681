#include "vofdm/modem.hpp"

#include <algorithm>
#include <cmath>

#include "vofdm/numerics.hpp"

namespace vofdm {

int Constellation::slice_index(Complex z) const {
    int best = 0;
    double best_d = std::norm(z - points[0]);
    for (int i = 1; i < size(); ++i) {
        const double d = std::norm(z - points[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

Constellation Constellation::bpsk() { return {"bpsk", {Complex(1, 0), Complex(-1, 0)}}; }

Constellation Constellation::qpsk() {
    const double s = 1.0 / std::sqrt(2.0);
    return {"qpsk", {Complex(s, s), Complex(-s, s), Complex(s, -s), Complex(-s, -s)}};
}

void VofdmConfig::validate() const {
    if (L < 1 || M < 1) throw config_error("VofdmConfig: L and M must be >= 1");
    if (!is_pow2(L) || !is_pow2(M)) throw config_error("VofdmConfig: L and M must be powers of two");
    if (P < 1 || L % P != 0) throw config_error("VofdmConfig: P must divide L");
    if (cp_len < 0) throw config_error("VofdmConfig: negative CP length");
    if (constellation.size() < 2 || !is_pow2(constellation.size()))
        throw config_error("VofdmConfig: constellation size must be a power of two >= 2");
}

CVec modulate(const CVec& X, const VofdmConfig& cfg) {
    const long N = cfg.N();
    if (X.size() != N)
        throw std::invalid_argument("modulate: expected " + std::to_string(N) + " symbols, got " +
                                    std::to_string(X.size()));
    CVec x(N + cfg.cp_len);
    CVec comp(cfg.L);
    for (int m = 0; m < cfg.M; ++m) {
        for (int l = 0; l < cfg.L; ++l) comp[l] = X[static_cast<long>(l) * cfg.M + m];
        const CVec t = idft(comp, /*normalized=*/true);
        for (int k = 0; k < cfg.L; ++k) x[cfg.cp_len + static_cast<long>(k) * cfg.M + m] = t[k];
    }
    for (int g = 0; g < cfg.cp_len; ++g) x[g] = x[N + g];  // tail copy
    return x;
}

std::vector<VectorBlock> demodulate(const CVec& y, const VofdmConfig& cfg) {
    const long N = cfg.N();
    if (y.size() != N)
        throw std::invalid_argument("demodulate: expected length " + std::to_string(N) + ", got " +
                                    std::to_string(y.size()));
    std::vector<VectorBlock> out(cfg.L);
    for (int l = 0; l < cfg.L; ++l) {
        out[l].index = l;
        out[l].symbols = CVec(cfg.M);
    }
    CVec comp(cfg.L);
    for (int m = 0; m < cfg.M; ++m) {
        for (int k = 0; k < cfg.L; ++k) comp[k] = y[static_cast<long>(k) * cfg.M + m];
        const CVec f = dft(comp, /*normalized=*/true);
        for (int l = 0; l < cfg.L; ++l) out[l].symbols[m] = f[l];
    }
    return out;
}

CMat unitary_U(int l, const VofdmConfig& cfg) {
    const int M = cfg.M;
    const double N = static_cast<double>(cfg.N());
    CMat U(M, M);
    for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c)
            U(r, c) = std::polar(1.0 / std::sqrt(static_cast<double>(M)),
                                 -kTwoPi * (l + static_cast<double>(r) * cfg.L) * c / N);
    return U;
}

BlockedChannelMatrix::BlockedChannelMatrix(int l, int M, Complex z_inv, std::vector<int> coords,
                                           std::vector<Complex> polyphase)
    : l_(l), M_(M), z_inv_(z_inv), coords_(std::move(coords)), polyphase_(std::move(polyphase)) {}

CMat BlockedChannelMatrix::dense() const {
    CMat H = CMat::Zero(M_, M_);
    for (int r = 0; r < M_; ++r)
        for (int k = 0; k < kappa(); ++k)
            H(r, col(r, k)) = r < coords_[k] ? polyphase_[k] * z_inv_ : polyphase_[k];
    return H;
}

BlockedChannelMatrix blocked_channel_matrix(const SparseChannel& h, int l,
                                            const VofdmConfig& cfg) {
    cfg.validate();
    if (h.max_delay >= cfg.N())
        throw std::invalid_argument("blocked_channel_matrix: D must be < N");

    auto [coords, kap] = kappa(h, cfg.M);
    std::vector<Complex> poly(coords.size(), Complex(0, 0));
    const double Ld = static_cast<double>(cfg.L);
    for (const auto& tap : h.taps) {
        const int m = static_cast<int>(imod(tap.delay, cfg.M));
        const long k = tap.delay / cfg.M;
        const auto it = std::lower_bound(coords.begin(), coords.end(), m);
        poly[it - coords.begin()] += tap.value * std::polar(1.0, -kTwoPi * l * static_cast<double>(k) / Ld);
    }
    return BlockedChannelMatrix(l, cfg.M, std::polar(1.0, -kTwoPi * l / Ld), std::move(coords),
                                std::move(poly));
}

}  // namespace vofdm
