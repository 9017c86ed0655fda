#pragma once

#include <functional>

namespace unibias {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // Richardson estimate, absolute
    long evaluations = 0;
};

// Adaptive Simpson on [a, b] to relative tolerance `rel_tol`. The integrand
// must be finite on the closed interval.
QuadResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, int max_depth = 60);

}  // namespace unibias
