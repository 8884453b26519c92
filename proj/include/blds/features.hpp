#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "simulate.hpp"
#include "types.hpp"

namespace blds {

/// History length L and input dimension p of the regression features.
///
/// Feature layout for time t (d = (p+1)^L + p - 1 entries):
///   block 0:      u_t                                        (p)
///   block 1:      u_{t-1}                                    (p)
///   block l >= 2: ubar_{t-1} (x) ... (x) ubar_{t-l+1} (x) u_{t-l}   (p (p+1)^{l-1})
/// with ubar = [1; u] and (a (x) b)[i*|b| + j] = a[i] b[j].
struct FeatureConfig {
    int L = 1;
    int p = 1;

    // (p+1)^(L+1) must stay below this.
    static constexpr std::int64_t kMaxGrowth = std::int64_t{1} << 31;

    void validate() const {
        detail::require_config(L >= 1, "FeatureConfig: L must be >= 1");
        detail::require_config(p >= 1, "FeatureConfig: p must be >= 1");
        std::int64_t growth = 1;
        for (int i = 0; i <= L; ++i) {
            growth *= (p + 1);
            if (growth > kMaxGrowth)
                throw ConfigError("FeatureConfig: (p+1)^(L+1) exceeds 2^31 for p=" + std::to_string(p) +
                                  ", L=" + std::to_string(L) + "; reduce L");
        }
    }

    /// (p+1)^e, valid once validate() passed.
    [[nodiscard]] Index power(int e) const {
        Index r = 1;
        for (int i = 0; i < e; ++i) r *= (p + 1);
        return r;
    }

    [[nodiscard]] Index dim() const { return power(L) + p - 1; }

    /// Width of block ell: p for ell = 0, else p (p+1)^{ell-1}.
    [[nodiscard]] Index block_width(int ell) const { return ell == 0 ? p : p * power(ell - 1); }

    /// First column of block ell; block_offset(L+1) == dim().
    [[nodiscard]] Index block_offset(int ell) const { return ell == 0 ? 0 : power(ell - 1) + p - 1; }

    friend bool operator==(const FeatureConfig&, const FeatureConfig&) = default;
};

/// Column bookkeeping for the Markov-like parameter
/// C A_{chain[0]} ... A_{chain[ell-2]} B e_j. ell in 1..L, j in 1..p.
struct MultiIndex {
    int ell = 1;
    std::vector<int> chain;
    int j = 1;

    friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

/// Base-(p+1) value of a chain, first element most significant.
inline Index flatten_chain(const std::vector<int>& chain, int p) {
    Index v = 0;
    for (int i : chain) {
        detail::require(i >= 0 && i <= p, "flatten_chain: index out of range");
        v = v * (p + 1) + i;
    }
    return v;
}

inline Index flat_column(const MultiIndex& mi, const FeatureConfig& cfg) {
    detail::require(mi.ell >= 1 && mi.ell <= cfg.L, "flat_column: ell out of range");
    detail::require(static_cast<int>(mi.chain.size()) == mi.ell - 1, "flat_column: chain length must be ell-1");
    detail::require(mi.j >= 1 && mi.j <= cfg.p, "flat_column: j out of range");
    return cfg.block_offset(mi.ell) + flatten_chain(mi.chain, cfg.p) * cfg.p + (mi.j - 1);
}

/// Inverse of flat_column. The first p columns (the D block) map to ell = 0.
inline MultiIndex multi_index_of(Index column, const FeatureConfig& cfg) {
    detail::require(column >= 0 && column < cfg.dim(), "multi_index_of: column out of range");
    MultiIndex mi;
    if (column < cfg.p) {
        mi.ell = 0;
        mi.j = static_cast<int>(column) + 1;
        return mi;
    }
    int ell = 1;
    while (column >= cfg.block_offset(ell + 1)) ++ell;
    Index local = column - cfg.block_offset(ell);
    mi.ell = ell;
    mi.j = static_cast<int>(local % cfg.p) + 1;
    Index code = local / cfg.p;
    mi.chain.assign(static_cast<std::size_t>(ell - 1), 0);
    for (int r = ell - 2; r >= 0; --r) {
        mi.chain[static_cast<std::size_t>(r)] = static_cast<int>(code % (cfg.p + 1));
        code /= (cfg.p + 1);
    }
    return mi;
}

namespace detail {

// out[i*|b| + j] = a[i] * b[j]
inline void kron_into(const double* a, Index na, const double* b, Index nb, double* out) {
    for (Index i = 0; i < na; ++i)
        for (Index j = 0; j < nb; ++j) out[i * nb + j] = a[i] * b[j];
}

}  // namespace detail

/// Writes the feature for one window into `out` (length cfg.dim()).
/// `window` holds u_{t-L}, ..., u_t as rows, oldest first. `scratch` is
/// reused across calls to avoid reallocating the Kronecker prefix.
inline void build_feature_into(const Eigen::Ref<const Matrix>& window, const FeatureConfig& cfg, double* out,
                               std::vector<double>& scratch) {
    const int L = cfg.L;
    const int p = cfg.p;
    detail::require(window.rows() == L + 1 && window.cols() == p,
                    "build_feature: window must be (L+1) x p, got " + std::to_string(window.rows()) + " x " +
                        std::to_string(window.cols()));
    auto input = [&](int lag, int i) { return window(L - lag, i); };

    for (int i = 0; i < p; ++i) out[i] = input(0, i);

    // prefix = ubar_{t-1} (x) ... (x) ubar_{t-ell+1}; starts as [1].
    const Index max_prefix = cfg.power(L - 1);
    scratch.resize(static_cast<std::size_t>(2 * max_prefix + p + 1));
    double* prefix = scratch.data();
    double* next = prefix + max_prefix;
    double* ubar = next + max_prefix;
    double* u = ubar + 1;
    Index prefix_len = 1;
    prefix[0] = 1.0;
    ubar[0] = 1.0;

    for (int ell = 1; ell <= L; ++ell) {
        if (ell >= 2) {
            for (int i = 0; i < p; ++i) u[i] = input(ell - 1, i);
            detail::kron_into(prefix, prefix_len, ubar, p + 1, next);
            std::swap(prefix, next);
            prefix_len *= (p + 1);
        }
        for (int i = 0; i < p; ++i) u[i] = input(ell, i);
        detail::kron_into(prefix, prefix_len, u, p, out + cfg.block_offset(ell));
    }
}

inline Vector build_feature(const Eigen::Ref<const Matrix>& window, const FeatureConfig& cfg) {
    cfg.validate();
    Vector f(cfg.dim());
    std::vector<double> scratch;
    build_feature_into(window, cfg, f.data(), scratch);
    return f;
}

/// Design matrix with rows for t = L..T (row s is t = L + s), built from a
/// (T+1) x p input sequence.
inline Matrix feature_matrix(const Matrix& inputs, const FeatureConfig& cfg) {
    cfg.validate();
    detail::require(inputs.cols() == cfg.p, "feature_matrix: inputs must have p columns");
    const Index T = inputs.rows() - 1;
    detail::require(T >= cfg.L, "feature_matrix: need T >= L (T=" + std::to_string(T) +
                                    ", L=" + std::to_string(cfg.L) + ")");
    const Index rows = T - cfg.L + 1;
    const Index d = cfg.dim();
    // Row-major staging keeps each feature contiguous while it is built.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> staged(rows, d);
    std::vector<double> scratch;
    for (Index s = 0; s < rows; ++s)
        build_feature_into(inputs.middleRows(s, cfg.L + 1), cfg, staged.row(s).data(), scratch);
    return staged;
}

inline Matrix feature_matrix(const Trajectory& traj, const FeatureConfig& cfg) { return feature_matrix(traj.u, cfg); }

/// [z_t; w_{t-1}; ...; w_{t-L}].
inline Vector noise_feature(const Trajectory& traj, Index t, int L) {
    detail::require(L >= 1, "noise_feature: L must be >= 1");
    detail::require(t >= L && t <= traj.horizon(), "noise_feature: need L <= t <= T");
    const Index m = traj.z.cols();
    const Index n = traj.w.cols();
    Vector v(m + n * L);
    v.head(m) = traj.z.row(t).transpose();
    for (int ell = 1; ell <= L; ++ell) v.segment(m + n * (ell - 1), n) = traj.w.row(t - ell).transpose();
    return v;
}

/// F = [I_m | C | C(u_{t-1} o A) | ... | C prod_{l=1}^{L-1} (u_{t-l} o A)].
/// `window` holds u_{t-L+1}, ..., u_{t-1} as rows, oldest first (L-1 rows).
inline Matrix build_F(const SystemParams& sys, const Eigen::Ref<const Matrix>& window) {
    const auto [n, p, m] = sys.dims;
    detail::require(window.cols() == p, "build_F: window must have p columns");
    const Index L = window.rows() + 1;
    Matrix F(m, m + n * L);
    F.leftCols(m).setIdentity();
    Matrix left = sys.C;
    for (Index ell = 0; ell < L; ++ell) {
        F.middleCols(m + n * ell, n) = left;
        if (ell + 1 < L) left = left * sys.transition(window.row(L - 2 - ell).transpose());
    }
    return F;
}

/// F at time t using the trajectory's inputs.
inline Matrix build_F(const SystemParams& sys, const Trajectory& traj, Index t, int L) {
    detail::require(L >= 1 && t >= L && t <= traj.horizon(), "build_F: need L <= t <= T");
    return build_F(sys, traj.u.middleRows(t - L + 1, L - 1));
}

/// eps_t = C (prod_{l=1}^{L} (u_{t-l} o A)) x_{t-L}, with l = 1 leftmost.
inline Vector truncation_bias(const SystemParams& sys, const Trajectory& traj, Index t, int L) {
    detail::require(L >= 1, "truncation_bias: L must be >= 1");
    detail::require(t >= L && t <= traj.horizon(), "truncation_bias: need L <= t <= T");
    detail::require(traj.has_states(), "truncation_bias: trajectory has no stored states");
    // Apply right-to-left to the state vector: cheaper than forming the product.
    Vector v = traj.x.row(t - L).transpose();
    for (int ell = L; ell >= 1; --ell) v = sys.transition(traj.u.row(t - ell).transpose()) * v;
    return sys.C * v;
}

}  // namespace blds
