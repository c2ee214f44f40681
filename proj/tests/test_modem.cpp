#include <doctest.h>

#include "vofdm/decoders.hpp"
#include "vofdm/modem.hpp"
#include "vofdm/numerics.hpp"

using namespace vofdm;

namespace {

CVec random_symbols(const VofdmConfig& cfg, Rng& rng) {
    CVec X(cfg.N());
    for (long i = 0; i < cfg.N(); ++i)
        X[i] = cfg.constellation.points[rng.uniform_u64(cfg.constellation.size())];
    return X;
}

// direct evaluation of the blocked-IDFT definition, no fast transform
CVec modulate_by_summation(const CVec& X, const VofdmConfig& cfg) {
    const int L = cfg.L, M = cfg.M;
    CVec x = CVec::Zero(cfg.N());
    for (int k = 0; k < L; ++k)
        for (int m = 0; m < M; ++m) {
            Complex acc = 0;
            for (int l = 0; l < L; ++l)
                acc += X[static_cast<long>(l) * M + m] *
                       std::polar(1.0, kTwoPi * k * l / static_cast<double>(L));
            x[static_cast<long>(k) * M + m] = acc / std::sqrt(static_cast<double>(L));
        }
    return x;
}

}  // namespace

TEST_SUITE_BEGIN("modem");

TEST_CASE("M=1 reduces to plain OFDM modulation") {
    VofdmConfig cfg{8, 1, 1, 0};
    Rng rng(1);
    const CVec X = random_symbols(cfg, rng);
    const CVec x = modulate(X, cfg);
    CHECK((x - idft(X, true)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("L=1 modulation is the identity") {
    VofdmConfig cfg{1, 8, 1, 0};
    Rng rng(2);
    const CVec X = random_symbols(cfg, rng);
    CHECK((modulate(X, cfg) - X).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("modulate matches the direct-summation oracle") {
    VofdmConfig cfg{4, 2, 1, 3};
    Rng rng(3);
    const CVec X = random_symbols(cfg, rng);
    const CVec x = modulate(X, cfg);
    const CVec ref = modulate_by_summation(X, cfg);
    for (long i = 0; i < cfg.N(); ++i)
        CHECK(std::abs(x[cfg.cp_len + i] - ref[i]) < 1e-12);
    // CP is the tail
    for (int g = 0; g < cfg.cp_len; ++g)
        CHECK(std::abs(x[g] - x[cfg.N() + g]) < 1e-15);
}

TEST_CASE("demodulate inverts modulate") {
    VofdmConfig cfg{16, 4, 1, 5};
    Rng rng(4);
    const CVec X = random_symbols(cfg, rng);
    const CVec x = modulate(X, cfg);
    const auto Ys = demodulate(x.tail(cfg.N()), cfg);
    for (int l = 0; l < cfg.L; ++l)
        for (int m = 0; m < cfg.M; ++m)
            CHECK(std::abs(Ys[l].symbols[m] - X[static_cast<long>(l) * cfg.M + m]) < 1e-10);
}

TEST_CASE("modulation is unitary") {
    VofdmConfig cfg{32, 4, 1, 0};
    Rng rng(5);
    const CVec X = random_symbols(cfg, rng);
    CHECK(std::abs(modulate(X, cfg).norm() - X.norm()) < 1e-10);
}

TEST_CASE("unitary_U basics") {
    VofdmConfig cfg{8, 4, 1, 0};
    SUBCASE("l=0 is the normalized DFT matrix") {
        const CMat U0 = unitary_U(0, cfg);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c)
                CHECK(std::abs(U0(r, c) - std::polar(0.5, -kTwoPi * r * c / 4.0)) < 1e-12);
    }
    SUBCASE("unitarity for all l") {
        for (int l = 0; l < cfg.L; ++l) {
            const CMat U = unitary_U(l, cfg);
            CHECK((U * U.adjoint() - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("M=2 L=2 l=1 hand-expanded entries") {
        VofdmConfig small{2, 2, 1, 0};
        const CMat U = unitary_U(1, small);
        const double s = 1.0 / std::sqrt(2.0);
        CHECK(std::abs(U(0, 0) - Complex(s, 0)) < 1e-12);
        CHECK(std::abs(U(0, 1) - s * std::polar(1.0, -kTwoPi * 1.0 / 4.0)) < 1e-12);
        CHECK(std::abs(U(1, 0) - Complex(s, 0)) < 1e-12);
        CHECK(std::abs(U(1, 1) - s * std::polar(1.0, -kTwoPi * 3.0 / 4.0)) < 1e-12);
    }
}

TEST_CASE("blocked channel matrix of a unit tap at delay 0 is the identity") {
    VofdmConfig cfg{8, 4, 1, 0};
    SparseChannel h;
    h.max_delay = 0;
    h.taps = {{0, Complex(1, 0)}};
    for (int l = 0; l < cfg.L; ++l) {
        const CMat Hd = blocked_channel_matrix(h, l, cfg).dense();
        CHECK((Hd - CMat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("M=1 blocked matrix equals the CFR sample") {
    VofdmConfig cfg{16, 1, 1, 0};
    Rng rng(6);
    const SparseChannel h = sample_sparse_channel(3, 7, rng);
    const CVec H = dft(h.dense(cfg.N()), false);
    for (int l = 0; l < cfg.L; ++l) {
        const CMat Hd = blocked_channel_matrix(h, l, cfg).dense();
        CHECK(std::abs(Hd(0, 0) - H[l]) < 1e-10);
    }
}

TEST_CASE("Eq.(8) diagonalization identity") {
    Rng rng(7);
    for (int M : {2, 4, 8}) {
        VofdmConfig cfg{16, M, 1, 0};
        const SparseChannel h = sample_sparse_channel(4, 11, rng);
        const CVec H = dft(h.dense(cfg.N()), false);
        for (int l = 0; l < cfg.L; ++l) {
            const CMat U = unitary_U(l, cfg);
            CMat D = CMat::Zero(M, M);
            for (int m = 0; m < M; ++m) D(m, m) = H[l + static_cast<long>(m) * cfg.L];
            const CMat lhs = blocked_channel_matrix(h, l, cfg).dense();
            CHECK((lhs - U.adjoint() * D * U).cwiseAbs().maxCoeff() < 1e-9);
        }
    }
}

TEST_CASE("noiseless end-to-end model identity Y_l = H_l X_l") {
    Rng rng(8);
    VofdmConfig cfg{16, 4, 1, 9};
    const SparseChannel h = sample_sparse_channel(3, 9, rng);
    const CVec X = random_symbols(cfg, rng);
    const CVec x = modulate(X, cfg);
    Rng noise_rng(0);
    const CVec y = transmit(x, cfg.cp_len, h, NoiseSpec::noiseless(), noise_rng);
    const auto Ys = demodulate(y, cfg);
    for (int l = 0; l < cfg.L; ++l) {
        const CMat Hl = blocked_channel_matrix(h, l, cfg).dense();
        CVec Xl(cfg.M);
        for (int m = 0; m < cfg.M; ++m) Xl[m] = X[static_cast<long>(l) * cfg.M + m];
        CHECK((Ys[l].symbols - Hl * Xl).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("pseudo-circulant rows have nonzeros exactly at (m - i) mod M") {
    Rng rng(9);
    VofdmConfig cfg{8, 8, 1, 0};
    const SparseChannel h = sample_sparse_channel(3, 20, rng);
    const auto [I, kap] = kappa(h, cfg.M);
    const CMat Hd = blocked_channel_matrix(h, 2, cfg).dense();
    for (int m = 0; m < cfg.M; ++m) {
        int nonzeros = 0;
        for (int c = 0; c < cfg.M; ++c) {
            const bool expected =
                std::find(I.begin(), I.end(), static_cast<int>(imod(m - c, cfg.M))) != I.end();
            if (std::abs(Hd(m, c)) > 1e-12) {
                ++nonzeros;
                CHECK(expected);
            }
        }
        CHECK(nonzeros <= kap);
    }
}

TEST_CASE("dimension errors") {
    VofdmConfig cfg{4, 2, 1, 0};
    CHECK_THROWS_AS(modulate(CVec::Zero(7), cfg), std::invalid_argument);
    CHECK_THROWS_AS(demodulate(CVec::Zero(9), cfg), std::invalid_argument);
}

TEST_SUITE_END();
