#pragma once

#include <random>
#include <string>
#include <string_view>

#include "rng.hpp"
#include "types.hpp"

namespace blds {

enum class InputKind { UniformSphere, Gaussian };

inline std::string_view to_string(InputKind kind) {
    return kind == InputKind::UniformSphere ? "sphere" : "gaussian";
}

inline InputKind parse_input_kind(std::string_view s) {
    if (s == "sphere" || s == "uniform-sphere" || s == "uniform_sphere") return InputKind::UniformSphere;
    if (s == "gaussian" || s == "normal") return InputKind::Gaussian;
    throw ConfigError("unknown input kind '" + std::string(s) + "' (expected sphere|gaussian)");
}

/// Input law. UniformSphere draws from the sphere of radius sqrt(p);
/// Gaussian draws N(0, I_p). Both are isotropic.
struct InputDistribution {
    InputKind kind = InputKind::UniformSphere;
};

template <typename Out>
void sample_input_into(const InputDistribution& dist, int p, Engine& rng, Out&& out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    if (dist.kind == InputKind::Gaussian) {
        for (int i = 0; i < p; ++i) out(i) = normal(rng);
        return;
    }
    const double radius = std::sqrt(static_cast<double>(p));
    for (;;) {
        double sq = 0.0;
        for (int i = 0; i < p; ++i) {
            out(i) = normal(rng);
            sq += out(i) * out(i);
        }
        if (sq > 0.0 && p == 1) {
            out(0) = out(0) > 0.0 ? 1.0 : -1.0;  // exact two-point law
            return;
        }
        if (sq > 0.0) {
            const double scale = radius / std::sqrt(sq);
            for (int i = 0; i < p; ++i) out(i) *= scale;
            return;
        }
    }
}

inline Vector sample_input(const InputDistribution& dist, int p, Engine& rng) {
    detail::require_config(p >= 1, "sample_input: p must be >= 1");
    Vector u(p);
    sample_input_into(dist, p, rng, u);
    return u;
}

/// count x p matrix of i.i.d. inputs, one per row.
inline Matrix sample_inputs(const InputDistribution& dist, int p, Index count, Engine& rng) {
    detail::require_config(p >= 1, "sample_inputs: p must be >= 1");
    Matrix U(count, p);
    for (Index t = 0; t < count; ++t) sample_input_into(dist, p, rng, U.row(t));
    return U;
}

struct NoiseConfig {
    double sigma = 0.0;  // std of i.i.d. Gaussian w_t and z_t coordinates
};

/// Aligned sequences for t = 0..T, one row per time step.
struct Trajectory {
    Matrix x;  // (T+1) x n
    Matrix u;  // (T+1) x p
    Matrix y;  // (T+1) x m
    Matrix w;  // (T+1) x n
    Matrix z;  // (T+1) x m

    [[nodiscard]] Index horizon() const { return u.rows() - 1; }
    [[nodiscard]] bool has_states() const { return x.rows() == u.rows(); }
};

struct SimulationOptions {
    double overflow_guard = 1e12;
};

/// Runs the recursion from x_0 = 0. Per step, w_t (n draws) then z_t (m
/// draws) are taken from `rng`, so a shorter run reproduces the prefix of a
/// longer one.
inline Trajectory simulate(const SystemParams& sys, const Matrix& inputs, const NoiseConfig& noise, Engine& rng,
                           const SimulationOptions& opts = {}) {
    sys.validate();
    const auto [n, p, m] = sys.dims;
    detail::require(inputs.cols() == p, "simulate: inputs must have p columns");
    detail::require(inputs.rows() >= 1, "simulate: need at least one input");
    detail::require_config(noise.sigma >= 0.0, "simulate: sigma must be nonnegative");
    const Index steps = inputs.rows();

    Trajectory tr;
    tr.u = inputs;
    tr.x = Matrix::Zero(steps, n);
    tr.y.resize(steps, m);
    tr.w.resize(steps, n);
    tr.z.resize(steps, m);

    std::normal_distribution<double> normal(0.0, 1.0);
    Vector x = Vector::Zero(n);
    for (Index t = 0; t < steps; ++t) {
        for (int i = 0; i < n; ++i) tr.w(t, i) = noise.sigma * normal(rng);
        for (int i = 0; i < m; ++i) tr.z(t, i) = noise.sigma * normal(rng);

        const auto u = inputs.row(t).transpose();
        tr.x.row(t) = x.transpose();
        tr.y.row(t) = (sys.C * x + sys.D * u + tr.z.row(t).transpose()).transpose();

        if (t + 1 < steps) {
            Vector next = sys.A[0] * x + sys.B * u + tr.w.row(t).transpose();
            for (int k = 0; k < p; ++k) next.noalias() += u(k) * (sys.A[static_cast<std::size_t>(k) + 1] * x);
            const double norm = next.norm();
            if (!std::isfinite(norm) || norm > opts.overflow_guard)
                throw InstabilityError("simulate: state norm exceeded overflow guard at t=" + std::to_string(t + 1),
                                       t + 1);
            x = std::move(next);
        }
    }
    return tr;
}

/// Closed-form state x_{t+1} = sum_l (prod_{k<l} (u_{t-k} o A)) (B u_{t-l} + w_{t-l}),
/// evaluated without reference to the recursion.
inline Vector unrolled_state(const SystemParams& sys, const Matrix& inputs, const Matrix& process_noise, Index t) {
    sys.validate();
    const int n = sys.dims.n;
    detail::require(inputs.cols() == sys.dims.p && process_noise.cols() == n, "unrolled_state: column mismatch");
    detail::require(t >= 0 && t < inputs.rows() && t < process_noise.rows(), "unrolled_state: t out of range");

    Vector x = Vector::Zero(n);
    Matrix product = Matrix::Identity(n, n);
    for (Index ell = 0; ell <= t; ++ell) {
        const Index s = t - ell;
        x += product * (sys.B * inputs.row(s).transpose() + process_noise.row(s).transpose());
        product = product * sys.transition(inputs.row(s).transpose());
    }
    return x;
}

}  // namespace blds
