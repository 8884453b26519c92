#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace blds;

TEST(SampleInput, SphereNormIsExact) {
    Engine rng = make_engine(1);
    for (int i = 0; i < 1000; ++i)
        EXPECT_NEAR(sample_input(InputDistribution{InputKind::UniformSphere}, 2, rng).norm(), std::sqrt(2.0), 1e-12);
}

TEST(SampleInput, SphereInOneDimensionIsSign) {
    Engine rng = make_engine(2);
    for (int i = 0; i < 200; ++i) {
        const double v = sample_input(InputDistribution{InputKind::UniformSphere}, 1, rng)(0);
        EXPECT_EQ(std::abs(v), 1.0);
    }
}

TEST(SampleInput, GaussianCovarianceNearIdentity) {
    Engine rng = make_engine(3);
    const Matrix X = sample_inputs(InputDistribution{InputKind::Gaussian}, 3, 100000, rng);
    const Matrix cov = X.transpose() * X / static_cast<double>(X.rows());
    EXPECT_LE(oracle::op_norm_power(cov - Matrix::Identity(3, 3)), 0.05);
}

TEST(SampleInput, SphereMeanNearZero) {
    Engine rng = make_engine(4);
    const Matrix X = sample_inputs(InputDistribution{InputKind::UniformSphere}, 3, 100000, rng);
    EXPECT_LE(X.colwise().mean().norm(), 0.02 * std::sqrt(3.0));
}

TEST(Simulate, ZeroInputsNoNoiseStayAtRest) {
    const SystemParams sys = random_system(Dims{3, 2, 2}, 0.5, 0.3, true, 5);
    Engine rng = make_engine(0);
    const Trajectory tr = simulate(sys, Matrix::Zero(20, 2), NoiseConfig{0.0}, rng);
    EXPECT_TRUE(tr.x.isZero(0.0));
    EXPECT_TRUE(tr.y.isZero(0.0));
}

TEST(Simulate, ScalarHandRecursion) {
    const double a0 = 0.3, a1 = -0.7, b = 1.5, c = 2.0, d = -0.4;
    SystemParams sys;
    sys.dims = Dims{1, 1, 1};
    sys.A = {Matrix::Constant(1, 1, a0), Matrix::Constant(1, 1, a1)};
    sys.B = Matrix::Constant(1, 1, b);
    sys.C = Matrix::Constant(1, 1, c);
    sys.D = Matrix::Constant(1, 1, d);
    Matrix u(3, 1);
    u << 0.8, -1.1, 0.5;
    Engine rng = make_engine(0);
    const Trajectory tr = simulate(sys, u, NoiseConfig{0.0}, rng);
    EXPECT_EQ(tr.x(0, 0), 0.0);
    EXPECT_NEAR(tr.y(0, 0), d * 0.8, 1e-15);
    EXPECT_NEAR(tr.y(1, 0), c * b * 0.8 + d * -1.1, 1e-14);
    const double x2 = (a0 + a1 * -1.1) * (b * 0.8) + b * -1.1;
    EXPECT_NEAR(tr.y(2, 0), c * x2 + d * 0.5, 1e-14);
}

TEST(Simulate, MatchesUnrolledStateAtFive) {
    const SystemParams sys = random_system(Dims{2, 2, 1}, 0.5, 0.3, true, 8);
    Engine in = make_engine(1), noise = make_engine(2);
    const Matrix u = sample_inputs(InputDistribution{InputKind::Gaussian}, 2, 7, in);
    const Trajectory tr = simulate(sys, u, NoiseConfig{0.0}, noise);
    EXPECT_LE((tr.x.row(6).transpose() - unrolled_state(sys, u, tr.w, 5)).norm(), 1e-10);
}

TEST(Simulate, RecursionEqualsUnrollProperty) {
    for (std::uint64_t s = 0; s < 100; ++s) {
        Engine meta = make_engine(1000 + s);
        std::uniform_int_distribution<int> dim(1, 4), horizon(1, 32);
        const Dims dims{dim(meta), dim(meta), dim(meta)};
        const SystemParams sys = random_system(dims, 0.6, 0.3, true, s);
        const Index T = horizon(meta);
        const Matrix u = sample_inputs(InputDistribution{InputKind::Gaussian}, dims.p, T + 1, meta);
        const Trajectory tr = simulate(sys, u, NoiseConfig{0.1}, meta);
        for (Index t = 0; t < T; ++t) {
            const Vector x_next = tr.x.row(t + 1).transpose();
            EXPECT_LE((x_next - unrolled_state(sys, u, tr.w, t)).norm(), 1e-9 * (1.0 + x_next.norm()))
                << "seed " << s << " t " << t;
        }
    }
}

TEST(UnrolledState, BaseCases) {
    const SystemParams sys = random_system(Dims{3, 2, 1}, 0.5, 0.3, true, 4);
    EXPECT_TRUE(unrolled_state(sys, Matrix::Zero(5, 2), Matrix::Zero(5, 3), 4).isZero(0.0));
    Matrix u(1, 2);
    u << 0.3, -0.2;
    Matrix w(1, 3);
    w << 0.1, 0.2, 0.3;
    EXPECT_TRUE(unrolled_state(sys, u, w, 0).isApprox(sys.B * u.transpose() + w.transpose()));
}

TEST(Simulate, NoiseStatisticsAndDeterminism) {
    const SystemParams sys = random_system(Dims{3, 2, 2}, 0.4, 0.2, true, 6);
    Engine in = make_engine(7);
    const Matrix u = sample_inputs(InputDistribution{InputKind::UniformSphere}, 2, 20001, in);
    Engine r1 = make_engine(8), r2 = make_engine(8);
    const Trajectory a = simulate(sys, u, NoiseConfig{0.1}, r1);
    const Trajectory b = simulate(sys, u, NoiseConfig{0.1}, r2);
    EXPECT_TRUE(a.y == b.y);
    EXPECT_NEAR(std::sqrt(a.w.squaredNorm() / a.w.size()), 0.1, 0.002);
    EXPECT_NEAR(std::sqrt(a.z.squaredNorm() / a.z.size()), 0.1, 0.002);
}

TEST(Simulate, ShorterRunIsPrefix) {
    const SystemParams sys = random_system(Dims{3, 2, 2}, 0.4, 0.2, true, 6);
    Engine in = make_engine(7);
    const Matrix u = sample_inputs(InputDistribution{InputKind::Gaussian}, 2, 101, in);
    Engine r1 = make_engine(8), r2 = make_engine(8);
    const Trajectory full = simulate(sys, u, NoiseConfig{0.1}, r1);
    const Trajectory part = simulate(sys, u.topRows(40), NoiseConfig{0.1}, r2);
    EXPECT_TRUE(full.y.topRows(40) == part.y);
}

TEST(Simulate, OverflowGuardReportsIndex) {
    SystemParams sys;
    sys.dims = Dims{1, 1, 1};
    sys.A = {Matrix::Constant(1, 1, 10.0), Matrix::Zero(1, 1)};
    sys.B = Matrix::Ones(1, 1);
    sys.C = Matrix::Ones(1, 1);
    sys.D = Matrix::Zero(1, 1);
    Engine rng = make_engine(0);
    try {
        simulate(sys, Matrix::Ones(40, 1), NoiseConfig{0.0}, rng);
        FAIL() << "expected InstabilityError";
    } catch (const InstabilityError& e) {
        // x_t = (10^t - 1)/9 first exceeds 1e12 at t = 13.
        EXPECT_EQ(e.index(), 13);
    }
}

TEST(Simulate, ShapeErrors) {
    const SystemParams sys = random_system(Dims{2, 2, 1}, 0.4, 0.2, true, 1);
    Engine rng = make_engine(0);
    EXPECT_THROW(simulate(sys, Matrix::Zero(5, 3), NoiseConfig{0.0}, rng), ShapeError);
    EXPECT_THROW(simulate(sys, Matrix::Zero(5, 2), NoiseConfig{-1.0}, rng), ConfigError);
}
