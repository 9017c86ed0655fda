#include <gtest/gtest.h>

#include <cmath>

#include "unibias/errors.hpp"
#include "unibias/stats.hpp"

using namespace unibias;

namespace {

// Hand expansion of the 2x2 moments for y = w_A x_A + w_B x_B.
struct ScalarMoments {
    double yxA, yxB, ysq;
};

ScalarMoments hand_moments(double sA, double sB, double rho, double wA, double wB, double noise = 0.0) {
    const double c = rho * sA * sB;
    return {wA * sA * sA + wB * c, wA * c + wB * sB * sB,
            wA * wA * sA * sA + 2 * wA * wB * c + wB * wB * sB * sB + noise * noise};
}

}  // namespace

TEST(BuildCorrelations, ScalarUncorrelated) {
    const auto s = build_correlations(DatasetSpec::scalar(2, 1, 0, 1, 1));
    const auto m = hand_moments(2, 1, 0, 1, 1);
    EXPECT_DOUBLE_EQ(s.sigma_yxA(0), m.yxA);
    EXPECT_DOUBLE_EQ(s.sigma_yxB(0), m.yxB);
    EXPECT_DOUBLE_EQ(s.y_sq, m.ysq);
    EXPECT_DOUBLE_EQ(s.sigma_yxA(0), 4.0);
    EXPECT_DOUBLE_EQ(s.sigma_yxB(0), 1.0);
    EXPECT_DOUBLE_EQ(s.y_sq, 5.0);
    EXPECT_FALSE(s.sample_count.has_value());
}

TEST(BuildCorrelations, ZeroTarget) {
    const auto s = build_correlations(DatasetSpec::scalar(1, 1, 0, 0, 0));
    EXPECT_EQ(s.sigma_yx().norm(), 0.0);
    EXPECT_EQ(s.y_sq, 0.0);
}

TEST(BuildCorrelations, Correlated) {
    const auto s = build_correlations(DatasetSpec::scalar(1, 1, 0.5, 1, 1));
    const auto m = hand_moments(1, 1, 0.5, 1, 1);
    EXPECT_NEAR(s.sigma_yxA(0), m.yxA, 1e-15);
    EXPECT_NEAR(s.sigma_yxB(0), m.yxB, 1e-15);
    EXPECT_NEAR(s.sigma_yxA(0), 1.5, 1e-15);
}

TEST(BuildCorrelations, NoiseAddsToTargetPower) {
    const auto s = build_correlations(DatasetSpec::scalar(1.5, 0.7, -0.3, 0.4, -1.2, 0.5));
    EXPECT_NEAR(s.y_sq, hand_moments(1.5, 0.7, -0.3, 0.4, -1.2, 0.5).ysq, 1e-14);
}

TEST(BuildCorrelations, RejectsNonPositiveDefinite) {
    DatasetSpec spec = DatasetSpec::scalar(2, 1, 0, 1, 1);
    spec.sigma << 4, 2, 2, 1;
    try {
        build_correlations(spec);
        FAIL() << "expected NonPositiveDefinite";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NonPositiveDefinite);
    }
}

TEST(BuildCorrelations, MatrixFormMatchesWstarSigma) {
    DatasetSpec spec;
    spec.dims_A = 2;
    spec.dims_B = 1;
    spec.sigma.resize(3, 3);
    spec.sigma << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.5;
    spec.w_star_A = RowVector{{0.5, -1.0}};
    spec.w_star_B = RowVector{{2.0}};
    const auto s = build_correlations(spec);
    const RowVector expected = spec.w_star() * spec.sigma;
    EXPECT_LT((s.sigma_yx() - expected).norm(), 1e-14);
    EXPECT_TRUE(is_symmetric(s.sigma()));
    EXPECT_TRUE(is_positive_definite(s.sigma()));
    // Cauchy-Schwarz on the regression.
    EXPECT_GE(s.y_sq + 1e-12, (s.sigma_yx() * s.sigma().inverse() * s.sigma_yx().transpose())(0, 0));
}

TEST(DatasetSpec, ValidateRejectsNegativeNoise) {
    auto spec = DatasetSpec::scalar(1, 1, 0, 1, 1, -0.1);
    EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(SampleDataset, Deterministic) {
    const auto spec = DatasetSpec::scalar(2, 1, 0.3, 1, -1, 0.2);
    const auto a = sample_dataset(spec, 1, 42);
    const auto b = sample_dataset(spec, 1, 42);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.targets, b.targets);
    const auto c = sample_dataset(spec, 1, 43);
    EXPECT_NE(a.inputs, c.inputs);
}

TEST(SampleDataset, NoiselessTargetsAreExact) {
    const auto spec = DatasetSpec::scalar(2, 1, 0.3, 0.7, -1.1);
    const auto s = sample_dataset(spec, 200, 1);
    const Vector y = s.inputs * spec.w_star().transpose();
    EXPECT_EQ(s.targets, y);
}

TEST(SampleDataset, SignLabels) {
    const auto spec = DatasetSpec::scalar(1, 1, 0, 1, 1, 0.0, LabelMode::Sign);
    const auto s = sample_dataset(spec, 500, 3);
    for (long i = 0; i < s.size(); ++i) {
        const double lin = s.inputs.row(i).dot(spec.w_star());
        EXPECT_EQ(s.targets(i), lin >= 0.0 ? 1.0 : -1.0);
    }
}

TEST(SampleDataset, VarianceMatchesSpec) {
    const auto s = sample_dataset(DatasetSpec::scalar(2, 1, 0, 1, 1), 100000, 7);
    const double mean = s.inputs.col(0).mean();
    const double var = (s.inputs.col(0).array() - mean).square().mean();
    EXPECT_NEAR(var / 4.0, 1.0, 0.05);
}

TEST(EstimateCorrelations, ConvergesToAnalytic) {
    const auto spec = DatasetSpec::scalar(2, 1, 0.5, 1, 1, 0.1);
    const auto analytic = build_correlations(spec);
    const auto est = estimate_correlations(sample_dataset(spec, 100000, 11));
    ASSERT_TRUE(est.sample_count.has_value());
    EXPECT_EQ(*est.sample_count, 100000);
    const Matrix a = analytic.sigma();
    const Matrix e = est.sigma();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(e(i, j), a(i, j), 0.05 * std::abs(a(i, j)));
    for (int i = 0; i < 2; ++i)
        EXPECT_NEAR(est.sigma_yx()(i), analytic.sigma_yx()(i), 0.05 * std::abs(analytic.sigma_yx()(i)));
    EXPECT_NEAR(est.y_sq, analytic.y_sq, 0.05 * analytic.y_sq);
}

TEST(EstimateCorrelations, DuplicatedRowIsRankDeficient) {
    const auto one = sample_dataset(DatasetSpec::scalar(1, 1, 0, 1, 1), 1, 5);
    SampleSet dup = one;
    dup.inputs = one.inputs.replicate(10, 1);
    dup.targets = one.targets.replicate(10, 1);
    try {
        estimate_correlations(dup, false);
        FAIL() << "expected RankDeficient";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::RankDeficient);
    }
}

TEST(EstimateCorrelations, CenteringIsIdempotent) {
    auto s = sample_dataset(DatasetSpec::scalar(1.3, 0.8, -0.4, 1, 2, 0.3), 300, 9);
    const RowVector mean = s.inputs.colwise().mean();
    s.inputs.rowwise() -= mean;
    s.targets.array() -= s.targets.mean();
    const auto a = estimate_correlations(s, true);
    const auto b = estimate_correlations(s, false);
    EXPECT_LT((a.sigma() - b.sigma()).norm(), 1e-13);
    EXPECT_LT((a.sigma_yx() - b.sigma_yx()).norm(), 1e-13);
    EXPECT_NEAR(a.y_sq, b.y_sq, 1e-13);
}

TEST(EmpiricalMoments, AcceptsFewerSamplesThanDims) {
    const auto spec = DatasetSpec::isotropic(10, 10, 1.0, 3.0, 0.1, 0.1, 0.5);
    const auto s = sample_dataset(spec, 8, 1);
    EXPECT_THROW(estimate_correlations(s), Error);
    const auto m = empirical_moments(s);
    EXPECT_EQ(m.dims_A(), 10);
    EXPECT_TRUE(is_positive_semidefinite(m.sigma()));
}

TEST(EffectiveCorrelation, NoCrossCorrelation) {
    const auto s = build_correlations(DatasetSpec::scalar(2, 1, 0, 1, 3));
    EXPECT_EQ(effective_correlation_B(s), s.sigma_yxB);
}

TEST(EffectiveCorrelation, CollinearVanishes) {
    Matrix sigma(2, 2);
    sigma << 4, 2, 2, 1;
    const RowVector w{{1.0, 1.0}};
    const auto s = CorrelationStats::from_moments(sigma, 1, w * sigma, (w * sigma * w.transpose())(0, 0));
    EXPECT_NEAR(effective_correlation_B(s)(0), 0.0, 1e-15);
}

TEST(EffectiveCorrelation, ScalarHandExpansion) {
    const double sA = 2, sB = 1, rho = 0.5;
    const auto m = hand_moments(sA, sB, rho, 1, 1);
    const double cross = rho * sA * sB;
    const double expected = m.yxB - m.yxA * cross / (sA * sA);
    const auto s = build_correlations(DatasetSpec::scalar(sA, sB, rho, 1, 1));
    EXPECT_NEAR(effective_correlation_B(s)(0), expected, 1e-15);
    EXPECT_NEAR(expected, 0.75, 1e-15);
}

TEST(EffectiveCorrelation, ZeroExactlyWhenCollinearInProperty) {
    // Sigma_yxB = Sigma_yxA Sigma_A^{-1} Sigma_AB holds when the target only
    // depends on x_A.
    for (double rho : {-0.8, -0.2, 0.3, 0.9}) {
        const auto s = build_correlations(DatasetSpec::scalar(1.7, 0.6, rho, 2.0, 0.0));
        EXPECT_NEAR(effective_correlation_B(s).norm(), 0.0, 1e-14) << rho;
    }
    const auto s = build_correlations(DatasetSpec::scalar(1.7, 0.6, 0.3, 2.0, 0.1));
    EXPECT_GT(effective_correlation_B(s).norm(), 1e-3);
}

TEST(CorrelationStats, SwappedExchangesBlocks) {
    const auto s = build_correlations(DatasetSpec::scalar(2, 1, 0.4, 1, -2));
    const auto t = s.swapped();
    EXPECT_EQ(t.sigma_A, s.sigma_B);
    EXPECT_EQ(t.sigma_B, s.sigma_A);
    EXPECT_EQ(t.sigma_yxA, s.sigma_yxB);
    EXPECT_EQ(t.sigma_AB, s.sigma_AB.transpose());
}

TEST(CorrelationStats, FromMomentsRejectsIndefinite) {
    Matrix sigma(2, 2);
    sigma << 1, 2, 2, 1;
    EXPECT_THROW(CorrelationStats::from_moments(sigma, 1, RowVector::Ones(2), 1.0), Error);
}
