#include "unibias/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace unibias {

namespace {

struct Simpson {
    const std::function<double(double)>& f;
    long evals = 0;
    double error = 0.0;

    double eval(double x) {
        ++evals;
        return f(x);
    }

    double recurse(double a, double b, double fa, double fm, double fb, double whole, double tol,
                   int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15.0 * tol) {
            error += std::abs(diff) / 15.0;
            return left + right + diff / 15.0;
        }
        return recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }
};

}  // namespace

QuadResult adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                            double rel_tol, int max_depth) {
    Simpson s{f};
    // A coarse composite pass sets the absolute scale for the tolerance.
    constexpr int panels = 16;
    const double h = (b - a) / panels;
    double fx[2 * panels + 1];
    for (int i = 0; i <= 2 * panels; ++i) fx[i] = s.eval(a + 0.5 * h * i);
    double coarse = 0.0;
    for (int i = 0; i < panels; ++i) coarse += h / 6.0 * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
    const double abs_tol = std::max(rel_tol * std::abs(coarse), 1e-300);

    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        const double lo = a + h * i;
        const double whole = h / 6.0 * (fx[2 * i] + 4.0 * fx[2 * i + 1] + fx[2 * i + 2]);
        total += s.recurse(lo, lo + h, fx[2 * i], fx[2 * i + 1], fx[2 * i + 2], whole,
                           abs_tol / panels, max_depth);
    }
    return QuadResult{total, s.error, s.evals};
}

}  // namespace unibias
