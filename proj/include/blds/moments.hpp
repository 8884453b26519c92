#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "features.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "types.hpp"

namespace blds {

/// Hypercontractivity constant gamma with E[(u.x)^4] <= gamma E[(u.x)^2]^2:
/// 3 for N(0, I_p), 3 / (1 + 2/p) for the sphere of radius sqrt(p).
inline double analytic_gamma(InputKind kind, int p) {
    detail::require_config(p >= 1, "analytic_gamma: p must be >= 1");
    return kind == InputKind::Gaussian ? 3.0 : 3.0 / (1.0 + 2.0 / p);
}

struct MomentReport {
    double gamma_hat = 0.0;         // max over directions of E^[(u.x)^4] / E^[(u.x)^2]^2
    double isotropy_dev = 0.0;      // max |E^[u u^T] - I|
    double third_moment_max = 0.0;  // max over unit directions of |E^[(u.x)^3]|
    Index sample_count = 0;
    Index direction_count = 0;
};

/// M directions uniform on the unit sphere of R^dim followed by the dim
/// coordinate axes, one per column.
inline Matrix sample_directions(Index dim, Index M, Engine& rng) {
    Matrix dirs(dim, M + dim);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Index c = 0; c < M; ++c) {
        double nrm = 0.0;
        do {
            for (Index i = 0; i < dim; ++i) dirs(i, c) = normal(rng);
            nrm = dirs.col(c).norm();
        } while (nrm == 0.0);
        dirs.col(c) /= nrm;
    }
    dirs.rightCols(dim).setIdentity();
    return dirs;
}

/// Running power sums of projections onto fixed directions.
class ProjectionMoments {
public:
    explicit ProjectionMoments(Matrix directions)
        : dirs_(std::move(directions)),
          s2_(Vector::Zero(dirs_.cols())),
          s3_(Vector::Zero(dirs_.cols())),
          s4_(Vector::Zero(dirs_.cols())),
          second_(Matrix::Zero(dirs_.rows(), dirs_.rows())) {}

    /// Adds a batch of samples, one per row.
    void add(const Matrix& batch) {
        detail::require(batch.cols() == dirs_.rows(), "ProjectionMoments: sample dimension mismatch");
        const Matrix proj = batch * dirs_;
        const auto sq = proj.array().square();
        s2_ += sq.colwise().sum().transpose().matrix();
        s3_ += (sq * proj.array()).colwise().sum().transpose().matrix();
        s4_ += sq.square().colwise().sum().transpose().matrix();
        second_.selfadjointView<Eigen::Lower>().rankUpdate(batch.transpose());
        count_ += batch.rows();
    }

    [[nodiscard]] Index count() const { return count_; }
    [[nodiscard]] Index directions() const { return dirs_.cols(); }

    /// Per-direction E^[(v.x)^4] / E^[(v.x)^2]^2.
    [[nodiscard]] Vector gamma_ratios() const {
        const double N = static_cast<double>(count_);
        Vector r(s2_.size());
        for (Index c = 0; c < s2_.size(); ++c) {
            const double m2 = s2_(c) / N;
            if (!(m2 > 0.0)) throw NumericalError("moments: zero empirical second moment along a direction");
            r(c) = (s4_(c) / N) / (m2 * m2);
        }
        return r;
    }

    /// Per-direction E^[(v.x)^3] / ||v||^3 and E^[(v.x)^4] / ||v||^4.
    [[nodiscard]] Vector third_moments() const { return normalized(s3_, 3); }
    [[nodiscard]] Vector fourth_moments() const { return normalized(s4_, 4); }

    [[nodiscard]] double isotropy_deviation() const {
        Matrix cov = second_.selfadjointView<Eigen::Lower>();
        cov /= static_cast<double>(count_);
        cov -= Matrix::Identity(cov.rows(), cov.cols());
        return cov.cwiseAbs().maxCoeff();
    }

private:
    [[nodiscard]] Vector normalized(const Vector& sums, int power) const {
        Vector out(sums.size());
        for (Index c = 0; c < sums.size(); ++c)
            out(c) = sums(c) / static_cast<double>(count_) / std::pow(dirs_.col(c).norm(), power);
        return out;
    }

    Matrix dirs_;
    Vector s2_, s3_, s4_;
    Matrix second_;
    Index count_ = 0;
};

inline constexpr Index kMomentBatch = 1 << 15;

/// Monte-Carlo moment report for any sampler with signature
/// sampler(Engine&, Eigen row) filling a p-vector.
template <typename Sampler>
MomentReport empirical_moments_from(Sampler&& sampler, int p, Index N, Index M, std::uint64_t seed) {
    detail::require_config(p >= 1, "empirical_moments: p must be >= 1");
    detail::require_config(N >= 1000, "empirical_moments: need N >= 1000 samples");
    detail::require_config(M >= 10, "empirical_moments: need M >= 10 directions");
    Engine dir_rng = make_engine(derive_seed(seed, Stream::Directions));
    ProjectionMoments acc(sample_directions(p, M, dir_rng));
    Engine rng = make_engine(derive_seed(seed, Stream::Samples));
    Matrix batch;
    for (Index done = 0; done < N;) {
        const Index b = std::min(kMomentBatch, N - done);
        batch.resize(b, p);
        for (Index i = 0; i < b; ++i) sampler(rng, batch.row(i));
        acc.add(batch);
        done += b;
    }
    MomentReport r;
    r.gamma_hat = acc.gamma_ratios().maxCoeff();
    r.third_moment_max = acc.third_moments().cwiseAbs().maxCoeff();
    r.isotropy_dev = acc.isotropy_deviation();
    r.sample_count = N;
    r.direction_count = acc.directions();
    return r;
}

inline MomentReport empirical_moments(const InputDistribution& dist, int p, Index N, Index M, std::uint64_t seed) {
    return empirical_moments_from([&](Engine& rng, auto&& row) { sample_input_into(dist, p, rng, row); }, p, N, M,
                                  seed);
}

inline double empirical_gamma(const InputDistribution& dist, int p, Index N, Index M, std::uint64_t seed) {
    return empirical_moments(dist, p, N, M, seed).gamma_hat;
}

/// max |E^[v v^T] - I| over a sample stored one vector per row.
inline double isotropy_check(const Matrix& vectors) {
    detail::require(vectors.rows() >= 1, "isotropy_check: empty sample");
    Matrix cov = Matrix::Zero(vectors.cols(), vectors.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(vectors.transpose());
    Matrix full = cov.selfadjointView<Eigen::Lower>();
    full /= static_cast<double>(vectors.rows());
    full -= Matrix::Identity(full.rows(), full.cols());
    return full.cwiseAbs().maxCoeff();
}

struct FeatureMomentReport {
    double max_fourth_moment = 0.0;  // max over unit v of E^[(u~.v)^4]
    double bound = 0.0;              // L (3 v gamma)^{L+1}
    double isotropy_dev = 0.0;
    bool satisfied = false;
    Index dim = 0;
    Index sample_count = 0;
    Index direction_count = 0;
};

inline constexpr Index kMaxFeatureMomentDim = 100;

/// Fourth moments of features built from N independent windows, against
/// the analytic bound L (3 v gamma)^{L+1}.
inline FeatureMomentReport fourth_moment_feature_check(const InputDistribution& dist, int p, int L, Index N, Index M,
                                                       std::uint64_t seed) {
    const FeatureConfig cfg{L, p};
    cfg.validate();
    detail::require_config(cfg.dim() <= kMaxFeatureMomentDim, "fourth_moment_feature_check: d exceeds 100");
    detail::require_config(N >= 1 && M >= 1, "fourth_moment_feature_check: need N, M >= 1");
    const Index d = cfg.dim();

    Engine dir_rng = make_engine(derive_seed(seed, Stream::Directions));
    ProjectionMoments acc(sample_directions(d, M, dir_rng));
    Engine rng = make_engine(derive_seed(seed, Stream::Samples));
    Matrix window(L + 1, p);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> batch;
    std::vector<double> scratch;
    for (Index done = 0; done < N;) {
        const Index b = std::min(kMomentBatch, N - done);
        batch.resize(b, d);
        for (Index i = 0; i < b; ++i) {
            for (int r = 0; r <= L; ++r) sample_input_into(dist, p, rng, window.row(r));
            build_feature_into(window, cfg, batch.row(i).data(), scratch);
        }
        acc.add(batch);
        done += b;
    }

    FeatureMomentReport r;
    r.max_fourth_moment = acc.fourth_moments().maxCoeff();
    r.bound = L * std::pow(std::max(3.0, analytic_gamma(dist.kind, p)), L + 1);
    r.isotropy_dev = acc.isotropy_deviation();
    r.satisfied = r.max_fourth_moment <= r.bound;
    r.dim = d;
    r.sample_count = N;
    r.direction_count = acc.directions();
    return r;
}

}  // namespace blds
