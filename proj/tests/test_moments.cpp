#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace blds;

namespace {
constexpr Index kN = 100000;
const double kTol = 1.0 / std::sqrt(static_cast<double>(kN));
}  // namespace

TEST(AnalyticGamma, Values) {
    EXPECT_EQ(analytic_gamma(InputKind::Gaussian, 5), 3.0);
    EXPECT_DOUBLE_EQ(analytic_gamma(InputKind::UniformSphere, 2), 1.5);
    EXPECT_DOUBLE_EQ(analytic_gamma(InputKind::UniformSphere, 1), 1.0);
}

TEST(EmpiricalGamma, GaussianNearThree) {
    const double g = empirical_gamma(InputDistribution{InputKind::Gaussian}, 3, kN, 64, 1);
    EXPECT_GE(g, 2.8);
    EXPECT_LE(g, 3.2);
}

TEST(EmpiricalGamma, SphereNearAnalytic) {
    EXPECT_NEAR(empirical_gamma(InputDistribution{InputKind::UniformSphere}, 2, kN, 64, 2), 1.5, 0.1);
}

TEST(EmpiricalGamma, TwoPointIsExactlyOne) {
    EXPECT_DOUBLE_EQ(empirical_gamma(InputDistribution{InputKind::UniformSphere}, 1, 5000, 16, 3), 1.0);
}

TEST(EmpiricalGamma, GaussianAboveSphere) {
    for (int p = 2; p <= 4; ++p)
        EXPECT_GT(empirical_gamma(InputDistribution{InputKind::Gaussian}, p, kN, 64, 4),
                  empirical_gamma(InputDistribution{InputKind::UniformSphere}, p, kN, 64, 4))
            << "p=" << p;
}

TEST(EmpiricalGamma, RejectsSmallBudgets) {
    EXPECT_THROW(empirical_gamma(InputDistribution{InputKind::Gaussian}, 2, 999, 64, 1), ConfigError);
    EXPECT_THROW(empirical_gamma(InputDistribution{InputKind::Gaussian}, 2, 1000, 9, 1), ConfigError);
}

TEST(ProjectionMoments, RatioIsScaleFree) {
    Engine rng = make_engine(5);
    const Matrix dirs = sample_directions(3, 20, rng);
    const Matrix X = sample_inputs(InputDistribution{InputKind::Gaussian}, 3, 4000, rng);
    ProjectionMoments a(dirs), b(2.0 * dirs), c(3.7 * dirs);
    a.add(X);
    b.add(X);
    c.add(X);
    EXPECT_TRUE(a.gamma_ratios() == b.gamma_ratios());
    EXPECT_LE(((a.gamma_ratios() - c.gamma_ratios()).array() / a.gamma_ratios().array()).abs().maxCoeff(), 1e-12);
}

TEST(ProjectionMoments, BatchingDoesNotMatter) {
    Engine rng = make_engine(6);
    const Matrix dirs = sample_directions(2, 10, rng);
    const Matrix X = sample_inputs(InputDistribution{InputKind::UniformSphere}, 2, 1000, rng);
    ProjectionMoments whole(dirs), split(dirs);
    whole.add(X);
    split.add(X.topRows(300));
    split.add(X.bottomRows(700));
    EXPECT_LE((whole.fourth_moments() - split.fourth_moments()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(split.count(), 1000);
}

TEST(SampleDirections, UnitNormsAndAxes) {
    Engine rng = make_engine(7);
    const Matrix D = sample_directions(4, 10, rng);
    ASSERT_EQ(D.cols(), 14);
    for (Index c = 0; c < D.cols(); ++c) EXPECT_NEAR(D.col(c).norm(), 1.0, 1e-14);
    EXPECT_TRUE(D.rightCols(4).isIdentity(0.0));
}

TEST(Isotropy, TwoPointSetIsExact) {
    Matrix v(2, 1);
    v << 1.0, -1.0;
    EXPECT_EQ(isotropy_check(v), 0.0);
}

TEST(Isotropy, SphereInputs) {
    Engine rng = make_engine(8);
    const Matrix X = sample_inputs(InputDistribution{InputKind::UniformSphere}, 3, kN, rng);
    EXPECT_LE(isotropy_check(X), 5.0 * kTol);
}

TEST(Isotropy, FeatureVectorsFromIndependentWindows) {
    const FeatureMomentReport r = fourth_moment_feature_check(InputDistribution{InputKind::UniformSphere}, 2, 2, kN, 32, 9);
    EXPECT_LE(r.isotropy_dev, 10.0 * kTol);
}

TEST(FeatureFourthMoment, WithinBound) {
    const FeatureMomentReport a = fourth_moment_feature_check(InputDistribution{InputKind::UniformSphere}, 1, 1, kN, 64, 10);
    EXPECT_DOUBLE_EQ(a.bound, 9.0);
    EXPECT_LE(a.max_fourth_moment, 9.0);
    EXPECT_TRUE(a.satisfied);
    const FeatureMomentReport b = fourth_moment_feature_check(InputDistribution{InputKind::Gaussian}, 2, 2, kN, 64, 11);
    EXPECT_DOUBLE_EQ(b.bound, 54.0);
    EXPECT_LE(b.max_fourth_moment, 54.0);
}

TEST(FeatureFourthMoment, RawCoordinateReducesToScalar) {
    // Along e_1 the feature is the scalar input u_t; for the two-point law its fourth moment is 1.
    const FeatureConfig cfg{2, 1};
    Engine rng = make_engine(12);
    ProjectionMoments acc(Matrix::Identity(cfg.dim(), cfg.dim()));
    Matrix feats(2000, cfg.dim());
    for (Index i = 0; i < feats.rows(); ++i)
        feats.row(i) = build_feature(sample_inputs(InputDistribution{InputKind::UniformSphere}, 1, 3, rng), cfg).transpose();
    acc.add(feats);
    EXPECT_DOUBLE_EQ(acc.fourth_moments()(0), 1.0);
    EXPECT_LE(acc.fourth_moments()(0), analytic_gamma(InputKind::UniformSphere, 1));
}

TEST(FeatureFourthMoment, RejectsLargeDimension) {
    EXPECT_THROW(fourth_moment_feature_check(InputDistribution{InputKind::Gaussian}, 2, 5, 1000, 10, 1), ConfigError);
}

TEST(ThirdMoments, SphereBelowTolerance) {
    const MomentReport r = empirical_moments(InputDistribution{InputKind::UniformSphere}, 2, kN, 64, 13);
    EXPECT_LE(r.third_moment_max, 5.0 * kTol);
}
