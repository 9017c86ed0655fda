#include <gtest/gtest.h>

#include <cmath>

#include "unibias/quadrature.hpp"

using namespace unibias;

TEST(AdaptiveSimpson, CubicIsExact) {
    const auto r = adaptive_simpson([](double x) { return 3 * x * x * x - x + 2; }, -1.0, 2.0, 1e-12);
    // 3/4 (16 - 1) - (4 - 1)/2 + 2*3
    EXPECT_NEAR(r.value, 11.25 - 1.5 + 6.0, 1e-12);
}

TEST(AdaptiveSimpson, SmoothFunctions) {
    EXPECT_NEAR(adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-10).value, std::exp(1.0) - 1.0,
                1e-9);
    EXPECT_NEAR(adaptive_simpson([](double x) { return std::sin(x); }, 0.0, M_PI, 1e-10).value, 2.0, 1e-9);
}

TEST(AdaptiveSimpson, EndpointSingularDerivative) {
    const auto r = adaptive_simpson([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-9);
    EXPECT_NEAR(r.value, 2.0 / 3.0, 1e-8);
    EXPECT_GT(r.evaluations, 5);
}

TEST(AdaptiveSimpson, ErrorEstimateBoundsTrueError) {
    for (double tol : {1e-4, 1e-6, 1e-8}) {
        const auto r = adaptive_simpson([](double x) { return 1.0 / (1.0 + x * x); }, 0.0, 1.0, tol);
        EXPECT_LE(std::abs(r.value - M_PI / 4), std::max(r.error, 1e-15) * 10 + 1e-14) << tol;
        EXPECT_LE(std::abs(r.value - M_PI / 4), tol * M_PI / 4 * 10);
    }
}

TEST(AdaptiveSimpson, EmptyInterval) {
    EXPECT_EQ(adaptive_simpson([](double) { return 1.0; }, 0.5, 0.5, 1e-8).value, 0.0);
}
