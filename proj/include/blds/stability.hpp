#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "features.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "rng.hpp"
#include "simulate.hpp"
#include "types.hpp"

namespace blds {

/// One sampled product M_1 ... M_k of transitions u o A, reported in logs.
struct ProductSample {
    Index sample = 0;
    int depth = 0;
    double log_norm = 0.0;             // log ||M_1 ... M_k||_op
    double log_spectral_radius = 0.0;  // log rho(M_1 ... M_k); -inf when nilpotent
};

/// Draws `samples` input sequences of length depth_max and visits every
/// prefix product. Sample i uses its own stream derived from `seed`, so
/// raising samples or depth_max only adds products to the visited set.
/// The running product is renormalized each step with the scale kept in
/// log form, which keeps rho^64-size values representable.
template <typename Visitor>
void for_each_sampled_product(const SystemParams& sys, const InputDistribution& dist, int depth_max, int samples,
                              std::uint64_t seed, Visitor&& visit) {
    sys.validate();
    detail::require_config(depth_max >= 1, "stability: depth_max must be >= 1");
    detail::require_config(samples >= 1, "stability: samples must be >= 1");
    const int n = sys.dims.n;
    const int p = sys.dims.p;
    Vector u(p);
    for (Index s = 0; s < samples; ++s) {
        Engine rng = make_engine(derive_seed(seed, Stream::Products, static_cast<std::uint64_t>(s)));
        Matrix Q = Matrix::Identity(n, n);
        double log_scale = 0.0;
        for (int k = 1; k <= depth_max; ++k) {
            sample_input_into(dist, p, rng, u);
            Q = Q * sys.transition(u);
            const double qn = op_norm(Q);
            if (!std::isfinite(qn))
                throw InstabilityError("stability: non-finite product at depth " + std::to_string(k), k);
            ProductSample ps;
            ps.sample = s;
            ps.depth = k;
            if (qn == 0.0) {
                ps.log_norm = -std::numeric_limits<double>::infinity();
                ps.log_spectral_radius = ps.log_norm;
                visit(ps);
                // Every longer product is zero as well.
                for (int kk = k + 1; kk <= depth_max; ++kk) {
                    ps.depth = kk;
                    visit(ps);
                }
                break;
            }
            ps.log_norm = log_scale + std::log(qn);
            const double qr = spectral_radius(Q);
            ps.log_spectral_radius =
                qr > 0.0 ? log_scale + std::log(qr) : -std::numeric_limits<double>::infinity();
            visit(ps);
            Q /= qn;
            log_scale += std::log(qn);
        }
    }
}

/// Lower estimate of the joint spectral radius of {u o A : u ~ dist}:
/// the running maximum of rho(M_1 ... M_k)^{1/k} over sampled products.
inline double jsr_estimate(const SystemParams& sys, const InputDistribution& dist, int depth_max, int samples,
                           std::uint64_t seed) {
    double best = 0.0;
    for_each_sampled_product(sys, dist, depth_max, samples, seed, [&](const ProductSample& ps) {
        if (std::isfinite(ps.log_spectral_radius))
            best = std::max(best, std::exp(ps.log_spectral_radius / ps.depth));
    });
    return best;
}

/// max over sampled products of ||M_1 ... M_k||_op / rho^k, k = 1..depth_max.
inline double phi_estimate(const SystemParams& sys, const InputDistribution& dist, double rho, int depth_max,
                           int samples, std::uint64_t seed) {
    detail::require_config(rho > 0.0 && rho < 1.0, "phi_estimate: rho must lie in (0, 1)");
    double best = 0.0;
    const double log_rho = std::log(rho);
    for_each_sampled_product(sys, dist, depth_max, samples, seed, [&](const ProductSample& ps) {
        if (std::isfinite(ps.log_norm)) best = std::max(best, std::exp(ps.log_norm - ps.depth * log_rho));
    });
    return best;
}

/// Monte-Carlo evidence for uniform stability. This never proves the
/// property: the definition quantifies over every input sequence.
struct StabilityReport {
    double rho_hat = 0.0;    // sampled lower estimate of the JSR
    double norm_rate = 0.0;  // max sampled ||M_1...M_depth||^{1/depth}
    double kappa_hat = 1.0;  // max(1, sampled phi) with the empty product included
    double rho = 0.0;
    double kappa = 0.0;
    int depth = 0;
    int samples = 0;
    bool certified = false;
};

inline StabilityReport certify_uniform_stability(const SystemParams& sys, const InputDistribution& dist, double rho,
                                                 double kappa, int depth_max, int samples, std::uint64_t seed) {
    detail::require_config(rho > 0.0 && rho < 1.0, "certify_uniform_stability: rho must lie in (0, 1)");
    StabilityReport r;
    r.rho = rho;
    r.kappa = kappa;
    r.depth = depth_max;
    r.samples = samples;
    const double log_rho = std::log(rho);
    double phi = 0.0;
    for_each_sampled_product(sys, dist, depth_max, samples, seed, [&](const ProductSample& ps) {
        if (std::isfinite(ps.log_spectral_radius))
            r.rho_hat = std::max(r.rho_hat, std::exp(ps.log_spectral_radius / ps.depth));
        if (std::isfinite(ps.log_norm)) {
            phi = std::max(phi, std::exp(ps.log_norm - ps.depth * log_rho));
            if (ps.depth == depth_max) r.norm_rate = std::max(r.norm_rate, std::exp(ps.log_norm / ps.depth));
        }
    });
    r.kappa_hat = std::max(1.0, phi);
    r.certified = r.rho_hat < rho && r.kappa_hat <= kappa;
    return r;
}

/// Scans rho over `grid` (entries in (0,1)), pairing each rho above the JSR
/// estimate with kappa = its sampled phi, and returns the pair that minimizes
/// kappa / (1 - rho), the factor entering the bound on ||F||. Returns an
/// uncertified report when no grid point exceeds the JSR estimate.
inline StabilityReport find_certificate(const SystemParams& sys, const InputDistribution& dist,
                                        const std::vector<double>& grid, int depth_max, int samples,
                                        std::uint64_t seed) {
    StabilityReport best;
    best.depth = depth_max;
    best.samples = samples;
    double best_score = std::numeric_limits<double>::infinity();
    for (double rho : grid) {
        StabilityReport r =
            certify_uniform_stability(sys, dist, rho, std::numeric_limits<double>::infinity(), depth_max, samples, seed);
        if (!(r.rho_hat < rho)) {
            if (!best.certified) best = r;
            continue;
        }
        r.kappa = r.kappa_hat;
        r.certified = true;
        const double score = r.kappa / (1.0 - rho);
        if (score < best_score) {
            best_score = score;
            best = r;
        }
    }
    return best;
}

inline double f_norm_bound(const SystemParams& sys, double kappa, double rho) {
    detail::require_config(rho > 0.0 && rho < 1.0, "f_norm_bound: rho must lie in (0, 1)");
    return 1.0 + kappa * op_norm(sys.C) / (1.0 - rho);
}

/// Checks ||F||_op <= 1 + kappa ||C||_op / (1 - rho) for the F built from
/// `window` (u_{t-L+1}, ..., u_{t-1}, oldest first).
inline bool f_norm_check(const SystemParams& sys, const Eigen::Ref<const Matrix>& window, double kappa, double rho) {
    return op_norm(build_F(sys, window)) <= f_norm_bound(sys, kappa, rho);
}

}  // namespace blds
