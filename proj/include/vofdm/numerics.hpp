#pragma once

#include "vofdm/types.hpp"

namespace vofdm {

/// Forward DFT, radix-2, power-of-two lengths only.
/// normalized=true divides by sqrt(n); normalized=false carries no factor,
/// so dft(zero-padded h, false) is the CFR convention H = FFT(h).
CVec dft(const CVec& x, bool normalized);

/// Inverse DFT. normalized=true uses (1/sqrt(n)) e^{+j2pi rc/n} entries;
/// normalized=false carries the full 1/n so idft(dft(x, f), f) == x for both flags.
CVec idft(const CVec& X, bool normalized);

/// Quadratic-time direct summation, any length >= 1. Test oracle for the fast paths.
CVec naive_dft(const CVec& x, bool normalized);
CVec naive_idft(const CVec& X, bool normalized);

/// y_n = sum_d h_d x_{(n-d) mod n}; h may be shorter than x (zero-padded).
CVec circular_convolve(const CVec& x, const CVec& h);

}  // namespace vofdm
