#pragma once

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "estimate.hpp"
#include "features.hpp"
#include "linalg.hpp"
#include "types.hpp"

namespace blds {

/// Exact G for a known system: the column block of chain (i_1..i_{l-1}) is
/// C A_{i_1} ... A_{i_{l-1}} B, and the first p columns are D.
inline MarkovParams true_markov(const SystemParams& sys, int L) {
    sys.validate();
    MarkovParams mp;
    mp.cfg = FeatureConfig{L, sys.dims.p};
    mp.cfg.validate();
    const int p = sys.dims.p;
    mp.G.resize(sys.dims.m, mp.cfg.dim());
    mp.G.leftCols(p) = sys.D;

    // Left products C A_{i_1} ... A_{i_r} for all chains of the current
    // length, kept in flattened (i_1 slowest) order.
    std::vector<Matrix> level{sys.C};
    for (int ell = 1; ell <= L; ++ell) {
        const Index offset = mp.cfg.block_offset(ell);
        for (std::size_t c = 0; c < level.size(); ++c)
            mp.G.middleCols(offset + static_cast<Index>(c) * p, p) = level[c] * sys.B;
        if (ell == L) break;
        std::vector<Matrix> next;
        next.reserve(level.size() * static_cast<std::size_t>(p + 1));
        for (const auto& left : level)
            for (int i = 0; i <= p; ++i) next.push_back(left * sys.A[static_cast<std::size_t>(i)]);
        level = std::move(next);
    }
    return mp;
}

/// [C B, C A_k B, ..., C A_k^{L-1} B] read out of G.
inline std::vector<Matrix> extract_powers(const MarkovParams& G, int k) {
    G.validate();
    detail::require(k >= 0 && k <= G.cfg.p, "extract_powers: k must lie in 0..p");
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(G.cfg.L));
    for (int ell = 1; ell <= G.cfg.L; ++ell)
        out.push_back(G.chain_block(std::vector<int>(static_cast<std::size_t>(ell - 1), k)));
    return out;
}

/// The block estimating C A_0^i A_k A_0^j B (chain 0^i, k, 0^j).
inline Matrix extract_mixed(const MarkovParams& G, int k, int i, int j) {
    G.validate();
    detail::require(k >= 0 && k <= G.cfg.p, "extract_mixed: k must lie in 0..p");
    detail::require(i >= 0 && j >= 0 && i + j + 1 <= G.cfg.L - 1,
                    "extract_mixed: degree i+j+1 exceeds L-1");
    std::vector<int> chain(static_cast<std::size_t>(i), 0);
    chain.push_back(k);
    chain.insert(chain.end(), static_cast<std::size_t>(j), 0);
    return G.chain_block(chain);
}

/// Block matrix with block (i, j) = block_at(i, j), each m x p.
inline Matrix block_hankel(int block_rows, int block_cols, Index m, Index p,
                           const std::function<Matrix(int, int)>& block_at) {
    Matrix H(block_rows * m, block_cols * p);
    for (int i = 0; i < block_rows; ++i)
        for (int j = 0; j < block_cols; ++j) H.block(i * m, j * p, m, p) = block_at(i, j);
    return H;
}

struct HoKalmanOptions {
    int block_rows = 0;  // 0 means n
    int block_cols = 0;  // 0 means n
    double gap_warning_ratio = 10.0;
};

/// A realization recovered from Markov-like parameters, in the same schema
/// as SystemParams, plus diagnostics of the rank decision.
struct Realization {
    SystemParams system;
    Vector hankel_singular_values;
    std::vector<std::string> warnings;
};

namespace detail {

struct HankelFactors {
    Matrix O_pinv;  // Sigma^{-1/2} U_n^T
    Matrix Q_pinv;  // V_n Sigma^{-1/2}
    Matrix C;       // first block row of O
    Matrix B;       // first block column of Q
    Vector singular_values;
    std::vector<std::string> warnings;
};

inline HankelFactors factor_hankel(const Matrix& H, int n, Index m, Index p, double gap_ratio) {
    Eigen::BDCSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    HankelFactors f;
    f.singular_values = svd.singularValues();
    const Vector& s = f.singular_values;
    const double cut = svd_cutoff(H.rows(), H.cols(), s.size() ? s(0) : 0.0);
    const Index rank = s.size() && s(0) > 0.0 ? numerical_rank(s, cut) : 0;
    if (rank < n)
        throw RankDeficiencyError("ho_kalman: Hankel matrix has numerical rank " + std::to_string(rank) +
                                      " < n = " + std::to_string(n),
                                  rank);
    if (s.size() > n && s(n) > 0.0 && s(n - 1) / s(n) < gap_ratio) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "ho_kalman: weak rank gap sigma_n/sigma_{n+1} = %.3g < %.3g; check n",
                      s(n - 1) / s(n), gap_ratio);
        f.warnings.emplace_back(buf);
    }
    const Vector root = s.head(n).cwiseSqrt();
    const Matrix O = svd.matrixU().leftCols(n) * root.asDiagonal();
    const Matrix Q = root.asDiagonal() * svd.matrixV().leftCols(n).transpose();
    f.O_pinv = root.cwiseInverse().asDiagonal() * svd.matrixU().leftCols(n).transpose();
    f.Q_pinv = svd.matrixV().leftCols(n) * root.cwiseInverse().asDiagonal();
    f.C = O.topRows(m);
    f.B = Q.leftCols(p);
    return f;
}

}  // namespace detail

/// Ho-Kalman on the A_0 Hankel {C A_0^{i+j} B}, then every A_k in the same
/// basis: A_k = O^+ H_k Q^+ with H_k(i, j) = C A_0^i A_k A_0^j B.
/// D is copied from the first p columns of G.
inline Realization ho_kalman(const MarkovParams& G, int n, const HoKalmanOptions& opts = {}) {
    G.validate();
    detail::require_config(n >= 1, "ho_kalman: n must be >= 1");
    const int n1 = opts.block_rows > 0 ? opts.block_rows : n;
    const int n2 = opts.block_cols > 0 ? opts.block_cols : n;
    const int L = G.cfg.L;
    const int p = G.cfg.p;
    const Index m = G.outputs();
    detail::require_config(n1 + n2 <= L,
                           "ho_kalman: need L >= n1 + n2 (L=" + std::to_string(L) +
                               ", n1+n2=" + std::to_string(n1 + n2) + ")");

    const std::vector<Matrix> powers0 = extract_powers(G, 0);  // powers0[d] = C A_0^d B
    const Matrix H = block_hankel(n1, n2, m, p, [&](int i, int j) { return powers0[static_cast<std::size_t>(i + j)]; });
    const Matrix H_shift =
        block_hankel(n1, n2, m, p, [&](int i, int j) { return powers0[static_cast<std::size_t>(i + j + 1)]; });

    detail::HankelFactors f = detail::factor_hankel(H, n, m, p, opts.gap_warning_ratio);

    Realization r;
    r.hankel_singular_values = f.singular_values;
    r.warnings = std::move(f.warnings);
    SystemParams& sys = r.system;
    sys.dims = Dims{n, p, static_cast<int>(m)};
    sys.C = f.C;
    sys.B = f.B;
    sys.D = G.D();
    sys.A.push_back(f.O_pinv * H_shift * f.Q_pinv);
    for (int k = 1; k <= p; ++k) {
        const Matrix Hk = block_hankel(n1, n2, m, p, [&](int i, int j) { return extract_mixed(G, k, i, j); });
        sys.A.push_back(f.O_pinv * Hk * f.Q_pinv);
    }
    return r;
}

/// Per-input linear realization (A_k, B, C), each in its own basis.
struct LinearRealization {
    Matrix A;
    Matrix B;
    Matrix C;
    Vector hankel_singular_values;
    std::vector<std::string> warnings;
};

/// Classic Ho-Kalman run separately on {C A_k^d B} for every k = 0..p. The
/// p+1 results are each correct up to their own similarity transform and
/// are not mutually consistent.
inline std::vector<LinearRealization> ho_kalman_per_input(const MarkovParams& G, int n,
                                                          const HoKalmanOptions& opts = {}) {
    G.validate();
    detail::require_config(n >= 1, "ho_kalman_per_input: n must be >= 1");
    const int n1 = opts.block_rows > 0 ? opts.block_rows : n;
    const int n2 = opts.block_cols > 0 ? opts.block_cols : n;
    detail::require_config(n1 + n2 <= G.cfg.L, "ho_kalman_per_input: need L >= n1 + n2");
    const int p = G.cfg.p;
    const Index m = G.outputs();

    std::vector<LinearRealization> out;
    for (int k = 0; k <= p; ++k) {
        const std::vector<Matrix> pw = extract_powers(G, k);
        const Matrix H = block_hankel(n1, n2, m, p, [&](int i, int j) { return pw[static_cast<std::size_t>(i + j)]; });
        const Matrix Hs =
            block_hankel(n1, n2, m, p, [&](int i, int j) { return pw[static_cast<std::size_t>(i + j + 1)]; });
        detail::HankelFactors f = detail::factor_hankel(H, n, m, p, opts.gap_warning_ratio);
        out.push_back(LinearRealization{f.O_pinv * Hs * f.Q_pinv, f.B, f.C, f.singular_values, std::move(f.warnings)});
    }
    return out;
}

/// ||G(realized) - G_ref||_op / ||G_ref||_op over every chain representable
/// with the reference's L.
inline double markov_reconstruction_error(const SystemParams& realized, const MarkovParams& reference) {
    const MarkovParams rebuilt = true_markov(realized, reference.cfg.L);
    const double ref = op_norm(reference.G);
    const double diff = op_norm(rebuilt.G - reference.G);
    return ref > 0.0 ? diff / ref : diff;
}

}  // namespace blds
