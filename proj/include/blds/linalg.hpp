#pragma once

#include <algorithm>
#include <limits>

#include "types.hpp"

namespace blds {

/// Largest singular value.
inline double op_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    if (std::min(M.rows(), M.cols()) == 1) return M.norm();
    Eigen::BDCSVD<Matrix> svd(M);
    return svd.singularValues()(0);
}

/// Relative singular-value cutoff used for every pseudoinverse and rank
/// decision: max(rows, cols) * eps * sigma_max.
inline double svd_cutoff(Index rows, Index cols, double sigma_max) {
    return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma_max;
}

inline Index numerical_rank(const Vector& singular_values, double cutoff) {
    return static_cast<Index>((singular_values.array() > cutoff).count());
}

/// Moore-Penrose pseudoinverse through a thin SVD.
inline Matrix pseudo_inverse(const Matrix& M) {
    if (M.size() == 0) return Matrix::Zero(M.cols(), M.rows());
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cut = svd_cutoff(M.rows(), M.cols(), s.size() ? s(0) : 0.0);
    Vector inv = Vector::Zero(s.size());
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > cut) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace blds
