#pragma once

#include <cstdint>
#include <string>

#include "rng.hpp"
#include "types.hpp"

namespace blds {

/// max |lambda| over the (complex) spectrum of a square matrix.
inline double spectral_radius(const Matrix& M) {
    detail::require(M.rows() == M.cols(), "spectral_radius: matrix must be square");
    if (M.size() == 0) return 0.0;
    detail::require(M.allFinite(), "spectral_radius: non-finite entry");
    Eigen::EigenSolver<Matrix> es(M, /*computeEigenvectors=*/false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: eigensolver did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

namespace detail {

// Spectral radius this small relative to the matrix scale is treated as zero.
inline bool numerically_nilpotent(const Matrix& M, double rho) {
    const double scale = M.cwiseAbs().maxCoeff();
    return scale == 0.0 || rho <= 1e-12 * scale;
}

}  // namespace detail

/// Rescales M so that its spectral radius equals rho_target.
inline Matrix scale_to_spectral_radius(const Matrix& M, double rho_target) {
    detail::require(M.rows() == M.cols(), "scale_to_spectral_radius: matrix must be square");
    detail::require_config(rho_target >= 0.0 && std::isfinite(rho_target),
                           "scale_to_spectral_radius: target must be finite and nonnegative");
    if (rho_target == 0.0) return Matrix::Zero(M.rows(), M.cols());
    const double rho = spectral_radius(M);
    if (detail::numerically_nilpotent(M, rho))
        throw UnscalableMatrixError("scale_to_spectral_radius: matrix is (numerically) nilpotent");
    return (rho_target / rho) * M;
}

inline constexpr int kRandomSystemRetryCap = 8;

/// Random test system: A_k with i.i.d. N(0,1) entries rescaled to
/// rho(A_0) = rho0 and rho(A_k) = rhok; B, C ~ N(0, 1/n), D ~ N(0, 1/m).
/// With scale_B = false, B and C keep unit-variance entries instead.
inline SystemParams random_system(const Dims& dims, double rho0, double rhok, bool scale_B, std::uint64_t seed) {
    dims.validate();
    detail::require_config(rho0 >= 0.0 && rhok >= 0.0, "random_system: spectral radii must be nonnegative");
    const auto [n, p, m] = dims;

    SystemParams sys;
    sys.dims = dims;
    sys.A.reserve(static_cast<std::size_t>(p) + 1);
    for (int k = 0; k <= p; ++k) {
        const double target = k == 0 ? rho0 : rhok;
        bool drawn = false;
        for (int attempt = 0; attempt < kRandomSystemRetryCap && !drawn; ++attempt) {
            Engine rng = make_engine(derive_seed(seed, Stream::System, static_cast<std::uint64_t>(k), attempt));
            Matrix Ak = gaussian_matrix(n, n, 1.0, rng);
            try {
                sys.A.push_back(scale_to_spectral_radius(Ak, target));
                drawn = true;
            } catch (const UnscalableMatrixError&) {
            }
        }
        if (!drawn)
            throw UnscalableMatrixError("random_system: A_" + std::to_string(k) + " nilpotent after " +
                                        std::to_string(kRandomSystemRetryCap) + " draws");
    }

    Engine rng = make_engine(derive_seed(seed, Stream::System, 1000u));
    const double bc_std = scale_B ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0;
    sys.B = gaussian_matrix(n, p, bc_std, rng);
    sys.C = gaussian_matrix(m, n, bc_std, rng);
    sys.D = gaussian_matrix(m, p, 1.0 / std::sqrt(static_cast<double>(m)), rng);
    return sys;
}

}  // namespace blds
