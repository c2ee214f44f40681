#pragma once

#include <string>
#include <vector>

#include "vofdm/channel.hpp"
#include "vofdm/types.hpp"

namespace vofdm {

/// Finite symbol alphabet with a fixed index order (ties in slicing and all
/// decoder argmins break toward the lowest index).
struct Constellation {
    std::string name;
    std::vector<Complex> points;

    int size() const { return static_cast<int>(points.size()); }
    int bits() const { return ilog2(points.size()); }  // R

    int slice_index(Complex z) const;
    Complex slice(Complex z) const { return points[slice_index(z)]; }

    static Constellation bpsk();  // {+1, -1}
    static Constellation qpsk();  // Gray-ordered unit QPSK
};

struct VofdmConfig {
    int L = 1;       // VB count
    int M = 1;       // VB size
    int P = 1;       // pilot-channel count
    int cp_len = 0;  // Gamma
    Constellation constellation = Constellation::bpsk();

    long N() const { return static_cast<long>(L) * M; }
    void validate() const;  // L,M powers of two; P | L
};

struct VectorBlock {
    int index = 0;  // l
    CVec symbols;   // length M
};

/// Eq.-(2) modulation: block into L VBs of size M, component-wise normalized
/// length-L IDFT, P/S, then CP of length cp_len copied from the tail.
/// Output length N + cp_len.
CVec modulate(const CVec& X, const VofdmConfig& cfg);

/// Eq.-(5) demodulation of a CP-stripped length-N sequence into L received VBs.
std::vector<VectorBlock> demodulate(const CVec& y, const VofdmConfig& cfg);

/// U_l = F_M Lambda_l with [U]_{r,c} = (1/sqrt(M)) e^{-j 2 pi (l + r L) c / N}.
CMat unitary_U(int l, const VofdmConfig& cfg);

/// Blocked pseudo-circulant channel matrix evaluated at z = e^{j 2 pi l / L}.
/// Row r has exactly kappa nonzeros, at columns (r - i) mod M for i in I;
/// the value of entry (r, (r - i_k) mod M) is A_k * z^{-1 if r < i_k}.
class BlockedChannelMatrix {
  public:
    BlockedChannelMatrix(int l, int M, Complex z_inv, std::vector<int> coords,
                         std::vector<Complex> polyphase);

    int subchannel() const { return l_; }
    int vb_size() const { return M_; }
    int kappa() const { return static_cast<int>(coords_.size()); }
    const std::vector<int>& coords() const { return coords_; }  // I, ascending

    int col(int r, int k) const { return static_cast<int>(imod(r - coords_[k], M_)); }
    Complex entry(int r, int k) const {
        ++reads_;
        return r < coords_[k] ? polyphase_[k] * z_inv_ : polyphase_[k];
    }

    CMat dense() const;

    /// Sparse-row reads since the last reset (instrumentation for the
    /// row-sparsity invariant; dense() does not count).
    long reads() const { return reads_; }
    void reset_reads() const { reads_ = 0; }

  private:
    int l_;
    int M_;
    Complex z_inv_;
    std::vector<int> coords_;
    std::vector<Complex> polyphase_;  // A_k = Htilde_{i_k}(z_l), aligned with coords_
    mutable long reads_ = 0;
};

BlockedChannelMatrix blocked_channel_matrix(const SparseChannel& h, int l,
                                            const VofdmConfig& cfg);

}  // namespace vofdm
