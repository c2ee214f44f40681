#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vofdm {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Configuration is structurally invalid (bad dimensions, violated preconditions).
struct config_error : std::runtime_error {
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// A grid point cannot be simulated (e.g. CP shorter than the delay spread).
struct infeasible_error : config_error {
    explicit infeasible_error(const std::string& what) : config_error(what) {}
};

/// A pilot block has a (near-)zero entry after the U_l rotation.
struct spectral_null_error : std::runtime_error {
    explicit spectral_null_error(const std::string& what) : std::runtime_error(what) {}
};

/// Channel matrix numerically singular (ZF only).
struct singular_channel_error : std::runtime_error {
    explicit singular_channel_error(const std::string& what) : std::runtime_error(what) {}
};

/// Enumeration budget exceeded (ML over too large an alphabet power).
struct budget_error : std::runtime_error {
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

inline bool is_pow2(long n) { return n > 0 && (n & (n - 1)) == 0; }

inline int ilog2(long n) {
    int k = 0;
    while ((1L << k) < n) ++k;
    return k;
}

inline long next_pow2(long n) {
    long p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline long imod(long a, long n) {
    long r = a % n;
    return r < 0 ? r + n : r;
}

}  // namespace vofdm
