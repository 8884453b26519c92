#pragma once

#include <limits>
#include <string>
#include <vector>

#include "features.hpp"
#include "linalg.hpp"
#include "types.hpp"

namespace blds {

/// G = [D | G_1 | ... | G_L], m x d. Column bookkeeping follows FeatureConfig.
struct MarkovParams {
    Matrix G;
    FeatureConfig cfg;

    void validate() const {
        cfg.validate();
        detail::require(G.cols() == cfg.dim(), "MarkovParams: column count " + std::to_string(G.cols()) +
                                                   " != d = " + std::to_string(cfg.dim()));
    }

    [[nodiscard]] Index outputs() const { return G.rows(); }
    [[nodiscard]] Matrix D() const { return G.leftCols(cfg.p); }
    [[nodiscard]] Matrix block(int ell) const { return G.middleCols(cfg.block_offset(ell), cfg.block_width(ell)); }

    /// The m x p block C A_{chain[0]} ... A_{chain[r-1]} B.
    [[nodiscard]] Matrix chain_block(const std::vector<int>& chain) const {
        const int ell = static_cast<int>(chain.size()) + 1;
        detail::require(ell <= cfg.L, "MarkovParams: chain longer than L-1");
        return G.middleCols(flat_column(MultiIndex{ell, chain, 1}, cfg), cfg.p);
    }
};

struct LseResult {
    MarkovParams estimate;
    Vector singular_values;  // of the design matrix, descending
    Index rank = 0;
    double cutoff = 0.0;
    std::vector<std::string> warnings;
};

/// Minimum-norm least-squares fit of Y ~ U G^T through one thin SVD of U.
/// Singular values at or below max(rows, d) * eps * sigma_max count as zero.
inline LseResult lse(const Matrix& U, const Matrix& Y, const FeatureConfig& cfg) {
    cfg.validate();
    detail::require(U.rows() == Y.rows(), "lse: design and output row counts differ");
    detail::require(U.cols() == cfg.dim(), "lse: design width does not match feature dimension");
    detail::require(U.rows() >= 1, "lse: empty design matrix");

    LseResult res;
    res.estimate.cfg = cfg;
    Eigen::BDCSVD<Matrix> svd(U, Eigen::ComputeThinU | Eigen::ComputeThinV);
    res.singular_values = svd.singularValues();
    const double smax = res.singular_values.size() ? res.singular_values(0) : 0.0;
    res.cutoff = svd_cutoff(U.rows(), U.cols(), smax);
    res.rank = smax > 0.0 ? numerical_rank(res.singular_values, res.cutoff) : 0;

    if (res.rank == 0) {
        res.estimate.G = Matrix::Zero(Y.cols(), U.cols());
        res.warnings.emplace_back("lse: design matrix is zero; returning G = 0");
        return res;
    }
    const Index r = res.rank;
    // G^T = V_r S_r^{-1} U_r^T Y
    Matrix coeffs = svd.matrixU().leftCols(r).transpose() * Y;
    coeffs = res.singular_values.head(r).cwiseInverse().asDiagonal() * coeffs;
    res.estimate.G = (svd.matrixV().leftCols(r) * coeffs).transpose();
    if (r < U.cols())
        res.warnings.emplace_back("lse: rank " + std::to_string(r) + " < d = " + std::to_string(U.cols()) +
                                  "; minimum-norm solution returned");
    return res;
}

/// Least squares on a trajectory: rows t = L..T of the design and outputs.
inline LseResult lse(const Trajectory& traj, const FeatureConfig& cfg) {
    const Matrix U = feature_matrix(traj, cfg);
    return lse(U, traj.y.bottomRows(U.rows()), cfg);
}

struct GramReport {
    double lambda_min = 0.0;
    double threshold = 0.0;  // (T - L + 1) / 4, i.e. rows / 4
    bool satisfied = false;
    Index rows = 0;
};

inline GramReport make_gram_report(double lambda_min, Index rows) {
    GramReport g;
    g.lambda_min = lambda_min;
    g.rows = rows;
    g.threshold = static_cast<double>(rows) / 4.0;
    g.satisfied = lambda_min >= g.threshold;
    return g;
}

/// lambda_min(U^T U) by a symmetric eigensolve of the Gram matrix.
inline GramReport gram_min_eig(const Matrix& U) {
    detail::require(U.size() > 0, "gram_min_eig: empty design matrix");
    Matrix gram = Matrix::Zero(U.cols(), U.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(U.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
    return make_gram_report(es.eigenvalues()(0), U.rows());
}

/// Same quantity from singular values already computed by lse.
inline GramReport gram_report_from_svd(const Vector& singular_values, Index rows, Index cols) {
    const double smin = rows >= cols && singular_values.size() == cols ? singular_values(cols - 1) : 0.0;
    return make_gram_report(smin * smin, rows);
}

/// ||G_hat - G_true||_op.
inline double estimation_error(const Matrix& G_hat, const Matrix& G_true) {
    detail::require(G_hat.rows() == G_true.rows() && G_hat.cols() == G_true.cols(),
                    "estimation_error: shape mismatch");
    return op_norm(G_hat - G_true);
}

/// Terms of ||G_hat - G|| <= ||(sum u u^T)^+|| (||sum u (F w)^T|| + ||sum u eps^T||).
struct ErrorDecomposition {
    double excitation = 0.0;
    double multiplier = 0.0;
    double truncation = 0.0;
    double bound = 0.0;
    double actual = 0.0;
    bool singular_gram = false;
    bool holds = true;  // actual <= bound + 1e-8
};

/// Rows of F_t w~_t and eps_t for t = L..T, stacked as (T-L+1) x m matrices.
struct OutputDecomposition {
    Matrix noise_part;
    Matrix bias_part;
};

inline OutputDecomposition output_decomposition(const SystemParams& sys, const Trajectory& traj,
                                                const FeatureConfig& cfg) {
    const Index T = traj.horizon();
    detail::require(T >= cfg.L, "output_decomposition: need T >= L");
    const Index rows = T - cfg.L + 1;
    OutputDecomposition out{Matrix(rows, sys.dims.m), Matrix(rows, sys.dims.m)};
    for (Index s = 0; s < rows; ++s) {
        const Index t = cfg.L + s;
        out.noise_part.row(s) = (build_F(sys, traj, t, cfg.L) * noise_feature(traj, t, cfg.L)).transpose();
        out.bias_part.row(s) = truncation_bias(sys, traj, t, cfg.L).transpose();
    }
    return out;
}

inline ErrorDecomposition error_decomposition(const SystemParams& sys, const Trajectory& traj,
                                              const FeatureConfig& cfg, const Matrix& G_true, const Matrix& G_hat) {
    const Matrix U = feature_matrix(traj, cfg);
    const OutputDecomposition parts = output_decomposition(sys, traj, cfg);

    ErrorDecomposition e;
    e.actual = estimation_error(G_hat, G_true);
    e.multiplier = op_norm(U.transpose() * parts.noise_part);
    e.truncation = op_norm(U.transpose() * parts.bias_part);

    Eigen::BDCSVD<Matrix> svd(U);
    const Vector& s = svd.singularValues();
    const double cut = svd_cutoff(U.rows(), U.cols(), s.size() ? s(0) : 0.0);
    const bool full_rank = U.rows() >= U.cols() && s.size() == U.cols() && s(U.cols() - 1) > cut;
    if (!full_rank) {
        e.singular_gram = true;
        e.excitation = std::numeric_limits<double>::infinity();
        e.bound = std::numeric_limits<double>::infinity();
        return e;
    }
    const double smin = s(U.cols() - 1);
    e.excitation = 1.0 / (smin * smin);
    e.bound = e.excitation * (e.multiplier + e.truncation);
    e.holds = e.actual <= e.bound + 1e-8;
    return e;
}

}  // namespace blds
