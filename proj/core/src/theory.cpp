#include "unibias/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include "unibias/errors.hpp"

namespace unibias {

DepthSpec DepthSpec::unequal(int L_A, int L_B, int L_c) {
    DepthSpec d;
    d.L = L_A + L_c;
    d.L_f = L_A;
    d.L_A = L_A;
    d.L_B = L_B;
    d.L_c = L_c;
    return d;
}

TimeRatio TimeRatio::finite(double value) {
    TimeRatio r;
    r.finite_ = true;
    r.value_ = value;
    return r;
}

TimeRatio TimeRatio::divergent(double residual_norm) {
    TimeRatio r;
    r.finite_ = false;
    r.value_ = std::numeric_limits<double>::infinity();
    r.residual_ = residual_norm;
    return r;
}

double TimeRatio::value() const {
    if (!finite_) {
        throw Error(ErrorKind::CollinearModalities,
                    "effective correlation of the second modality vanishes; it is never learned");
    }
    return value_;
}

double TimeRatio::as_double() const { return value_; }

std::string TimeRatio::to_string() const {
    if (!finite_) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value_);
    return buf;
}

namespace {

constexpr double kTieTolerance = 1e-12;

// Statistics relabeled so that the first modality has the larger
// ||Sigma_yx||.
struct Ordered {
    CorrelationStats s;
    bool swapped = false;
    double n_first = 0.0;
    double n_second = 0.0;
    double k = 1.0;
    bool tie = false;
};

Ordered order(const CorrelationStats& stats) {
    Ordered o;
    const double nA = stats.sigma_yxA.norm();
    const double nB = stats.sigma_yxB.norm();
    o.swapped = nB > nA;
    o.s = o.swapped ? stats.swapped() : stats;
    o.n_first = std::max(nA, nB);
    o.n_second = std::min(nA, nB);
    o.tie = o.n_first == 0.0 || (o.n_first - o.n_second) <= kTieTolerance * o.n_first;
    o.k = o.n_first > 0.0 ? o.n_second / o.n_first : 1.0;
    if (o.tie) o.k = 1.0;
    return o;
}

// ||Sigma~_yxB|| together with the scale it is compared against for the
// collinearity test.
struct EffCorr {
    double norm = 0.0;
    bool vanishes = false;
    // Sigma_yxB and Sigma~_yxB point in opposite directions. The growing
    // mode of the second branch then shrinks during the first phase, so the
    // second modality starts from u0^{1+k} instead of u0^{1-k}.
    bool anti_aligned = false;
    // +1, or -1 when anti-aligned; multiplies ||Sigma_yxB|| in the gap.
    double sign() const { return anti_aligned ? -1.0 : 1.0; }
};

EffCorr eff_corr(const CorrelationStats& s) {
    const RowVector coef = right_solve_spd(s.sigma_yxA, s.sigma_A);
    const RowVector proj = coef * s.sigma_AB;
    const RowVector eff = s.sigma_yxB - proj;
    EffCorr e;
    e.norm = eff.norm();
    const double scale = s.sigma_yxB.norm() + proj.norm();
    e.vanishes = e.norm <= kTieTolerance * std::max(scale, 1e-300);
    const double nB = s.sigma_yxB.norm();
    if (!e.vanishes && nB > 0.0) e.anti_aligned = s.sigma_yxB.dot(eff) <= -(1.0 - 1e-9) * nB * e.norm;
    return e;
}

double saddle_norm(const CorrelationStats& s) { return right_solve_spd(s.sigma_yxA, s.sigma_A).norm(); }

void check_u0(double u0) {
    if (!(u0 > 0.0 && u0 < 1.0)) throw Error(ErrorKind::BadDomain, "u0 must lie in (0, 1)");
}

}  // namespace

Manifolds fixed_points(const CorrelationStats& stats) {
    const Matrix sigma = stats.sigma();
    if (!is_positive_definite(sigma)) throw Error(ErrorKind::SingularBlock, "input correlation is singular");
    Manifolds m;
    const RowVector global = right_solve_spd(stats.sigma_yx(), sigma);
    m.m_star_A = global.head(stats.dims_A());
    m.m_star_B = global.tail(stats.dims_B());
    m.m_A_saddle = right_solve_spd(stats.sigma_yxA, stats.sigma_A);
    m.m_B_saddle = right_solve_spd(stats.sigma_yxB, stats.sigma_B);
    return m;
}

SaddleLosses saddle_losses(const CorrelationStats& stats) {
    const RowVector a = right_solve_spd(stats.sigma_yxA, stats.sigma_A);
    const RowVector b = right_solve_spd(stats.sigma_yxB, stats.sigma_B);
    return SaddleLosses{0.5 * (stats.y_sq - a.dot(stats.sigma_yxA)),
                        0.5 * (stats.y_sq - b.dot(stats.sigma_yxB))};
}

Preference superficial_preference(const CorrelationStats& stats) {
    const Ordered o = order(stats);
    if (o.tie) throw Error(ErrorKind::Tie, "both modalities have equal input-output correlation norm");
    const SaddleLosses l = saddle_losses(stats);
    Preference p;
    p.first = o.swapped ? Modality::B : Modality::A;
    // Lower saddle loss means larger explained variance Sigma_yx Sigma^-1 Sigma_yx^T.
    const double first_loss = o.swapped ? l.loss_at_MB : l.loss_at_MA;
    const double second_loss = o.swapped ? l.loss_at_MA : l.loss_at_MB;
    p.superficial = first_loss > second_loss;
    return p;
}

RowVector misattribution(const CorrelationStats& stats) {
    const Manifolds m = fixed_points(stats);
    return m.m_A_saddle - m.m_star_A;
}

TwoLayerTimes times_two_layer(const CorrelationStats& stats, double u0, double tau) {
    if (!(u0 > 0.0 && u0 <= 1.0)) throw Error(ErrorKind::BadDomain, "u0 must lie in (0, 1]");
    const Ordered o = order(stats);
    const double log_term = std::log(1.0 / u0);
    TwoLayerTimes t;
    t.t_A = o.n_first > 0.0 ? tau * log_term / o.n_first : std::numeric_limits<double>::infinity();
    if (o.tie) {
        t.t_B = t.t_A;
        return t;
    }
    const EffCorr e = eff_corr(o.s);
    if (e.vanishes) {
        t.t_B = log_term == 0.0 ? t.t_A : std::numeric_limits<double>::infinity();
        return t;
    }
    t.t_B = t.t_A + tau * (1.0 - e.sign() * o.k) / e.norm * log_term;
    return t;
}

TimeRatio ratio_two_layer(const CorrelationStats& stats) {
    const Ordered o = order(stats);
    if (o.tie) return TimeRatio::finite(1.0);
    const EffCorr e = eff_corr(o.s);
    if (e.vanishes) return TimeRatio::divergent(e.norm);
    return TimeRatio::finite(1.0 + (o.n_first - e.sign() * o.n_second) / e.norm);
}

QuadResult integral_I_detail(int L, int L_f, double k, double tol) {
    if (L_f <= 2 || L_f > L) throw Error(ErrorKind::BadDomain, "integral_I requires 2 < L_f <= L");
    if (!(k > 0.0 && k <= 1.0)) throw Error(ErrorKind::BadDomain, "k must lie in (0, 1]");
    const double p_inner = 2.0 / (2.0 - L_f);
    const double p_outer = 0.5 * (L_f - L);
    // x = 1/s maps [1, inf) to (0, 1]; integrand s^{L-3} [1 + T(s)]^{p_outer}
    // with T(s) = s^2 (k s^{L_f-2} + 1 - k)^{2/(2-L_f)}.
    auto g = [=](double s) {
        double t;
        if (s == 0.0) {
            t = k == 1.0 ? 1.0 : 0.0;
        } else {
            const double base = k * std::pow(s, L_f - 2) + (1.0 - k);
            t = std::exp(2.0 * std::log(s) + p_inner * std::log(base));
        }
        const double lead = L == 3 ? 1.0 : std::pow(s, L - 3);
        return lead * std::pow(1.0 + t, p_outer);
    };
    return adaptive_simpson(g, 0.0, 1.0, tol);
}

double integral_I(int L, int L_f, double k, double tol) { return integral_I_detail(L, L_f, k, tol).value; }

QuadResult integral_I_fusion2(int L, double k, double tol) {
    if (L <= 2) throw Error(ErrorKind::BadDomain, "the L_f = 2 integral requires L > 2");
    if (!(k > 0.0 && k <= 1.0)) throw Error(ErrorKind::BadDomain, "k must lie in (0, 1]");
    const double expo = 1.0 - 0.5 * L;
    // In s = 1/x: s^{L-3} (1 + s^{2-2k})^{1-L/2}.
    auto g = [=](double s) {
        const double lead = L == 3 ? 1.0 : std::pow(s, L - 3);
        const double inner = k == 1.0 ? 1.0 : (s == 0.0 ? 0.0 : std::pow(s, 2.0 - 2.0 * k));
        return lead * std::pow(1.0 + inner, expo);
    };
    return adaptive_simpson(g, 0.0, 1.0, tol);
}

QuadResult integral_I_unequal(int L_A, int L_B, int L_c, double c, double tol) {
    if (L_A <= 2 || L_B <= 2) throw Error(ErrorKind::BadDomain, "unequal depth requires L_A, L_B > 2");
    if (L_c < 0) throw Error(ErrorKind::BadDomain, "L_c must be non-negative");
    if (!(c >= 0.0) || c > 1.0) {
        throw Error(ErrorKind::BadDomain, "the unequal-depth integrand base must stay positive (c <= 1)");
    }
    const double p_inner = 2.0 / (2.0 - L_B);
    const double p_outer = -0.5 * L_c;
    // In s = 1/x: s^{L_A-3+L_c} [1 + s^2 (1 - c + c s^{L_A-2})^{2/(2-L_B)}]^{-L_c/2}.
    auto g = [=](double s) {
        if (s == 0.0) return L_A - 3 + L_c == 0 ? 1.0 : 0.0;
        const double base = 1.0 - c + c * std::pow(s, L_A - 2);
        const double t = std::exp(2.0 * std::log(s) + p_inner * std::log(base));
        return std::pow(s, L_A - 3 + L_c) * std::pow(1.0 + t, p_outer);
    };
    return adaptive_simpson(g, 0.0, 1.0, tol);
}

TimeRatio ratio_deep(const CorrelationStats& stats, const DepthSpec& depth, double u0) {
    if (depth.is_unequal()) return ratio_unequal(stats, depth, u0);
    const int L = depth.L;
    const int L_f = depth.L_f;
    if (L_f < 1 || L_f > L) throw Error(ErrorKind::BadDomain, "fusion layer must satisfy 1 <= L_f <= L");
    if (L_f == 1) return TimeRatio::finite(1.0);
    check_u0(u0);
    if (L == 2) return ratio_two_layer(stats);

    const Ordered o = order(stats);
    if (o.tie) return TimeRatio::finite(1.0);
    const EffCorr e = eff_corr(o.s);
    if (e.vanishes) return TimeRatio::divergent(e.norm);
    const double gap = o.n_first - e.sign() * o.n_second;
    const double m_A = saddle_norm(o.s);
    if (L_f == 2) {
        const double I = integral_I_fusion2(L, o.k).value;
        const double num = gap * std::pow(u0, L - 2) * std::log(1.0 / u0);
        const double den = e.norm * std::pow(m_A, 1.0 - 2.0 / L) * I;
        return TimeRatio::finite(1.0 + num / den);
    }
    const double I = integral_I(L, L_f, o.k);
    const double num = gap * std::pow(u0, L - L_f);
    const double den = e.norm * (L_f - 2) * std::pow(m_A, 1.0 - static_cast<double>(L_f) / L) * I;
    return TimeRatio::finite(1.0 + num / den);
}

namespace {

struct UnequalParts {
    Ordered o;
    int L_A = 0, L_B = 0, L_c = 0;
    double c = 0.0;
};

UnequalParts unequal_parts(const CorrelationStats& stats, const DepthSpec& depth, double u0) {
    if (!depth.is_unequal() || !depth.L_B || !depth.L_c) {
        throw Error(ErrorKind::BadDomain, "ratio_unequal requires L_A, L_B and L_c");
    }
    check_u0(u0);
    UnequalParts p;
    p.o = order(stats);
    p.L_A = *depth.L_A;
    p.L_B = *depth.L_B;
    p.L_c = *depth.L_c;
    if (p.o.swapped) std::swap(p.L_A, p.L_B);
    if (p.L_A <= 2 || p.L_B <= 2) throw Error(ErrorKind::BadDomain, "unequal depth requires L_A, L_B > 2");
    if (p.L_c < 0) throw Error(ErrorKind::BadDomain, "L_c must be non-negative");
    if (p.o.n_first > 0.0) {
        p.c = (p.L_B - 2.0) * p.o.n_second / ((p.L_A - 2.0) * p.o.n_first) * std::pow(u0, p.L_B - p.L_A);
    }
    return p;
}

}  // namespace

TimeRatio ratio_unequal(const CorrelationStats& stats, const DepthSpec& depth, double u0) {
    const UnequalParts p = unequal_parts(stats, depth, u0);
    if (p.o.tie && p.L_A == p.L_B) return TimeRatio::finite(1.0);
    const EffCorr e = eff_corr(p.o.s);
    if (e.vanishes) return TimeRatio::divergent(e.norm);
    const double I = integral_I_unequal(p.L_A, p.L_B, p.L_c, p.c).value;
    const double num = std::pow(u0, p.L_c + p.L_A - p.L_B) / (p.L_B - 2.0) * p.o.n_first -
                       std::pow(u0, p.L_c) / (p.L_A - 2.0) * e.sign() * p.o.n_second;
    const double m_A = saddle_norm(p.o.s);
    const double den = std::pow(m_A, static_cast<double>(p.L_c) / (p.L_A + p.L_c)) * e.norm * I;
    return TimeRatio::finite(1.0 + num / den);
}

std::vector<TotalMaps> exact_trajectory(const CorrelationStats& stats, double u_A0, double u_B0,
                                        double tau, const std::vector<double>& times) {
    const double scale = std::max(stats.sigma_A.cwiseAbs().maxCoeff(), stats.sigma_B.cwiseAbs().maxCoeff());
    if (stats.sigma_AB.size() && stats.sigma_AB.cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorKind::NotSolvable, "modalities are correlated");
    }
    const auto isotropic_var = [&](const Matrix& block) {
        const double v = block.trace() / static_cast<double>(block.rows());
        const Matrix dev = block - v * Matrix::Identity(block.rows(), block.cols());
        if (!(v > 0.0) || dev.cwiseAbs().maxCoeff() > 1e-12 * scale) {
            throw Error(ErrorKind::NotSolvable, "input blocks are not isotropic");
        }
        return v;
    };
    const double var_A = isotropic_var(stats.sigma_A);
    const double var_B = isotropic_var(stats.sigma_B);
    if (!(u_A0 >= 0.0) || !(u_B0 >= 0.0) || !(tau > 0.0)) {
        throw Error(ErrorKind::NotSolvable, "initial norms must be non-negative and tau positive");
    }

    // Balanced aligned two-layer solution: d|w|/dt = 2|w| (s - var |w|) / tau.
    const auto magnitude = [tau](double s, double var, double w0, double t) {
        if (w0 == 0.0) return 0.0;
        if (s == 0.0) return w0 / (1.0 + 2.0 * var * w0 * t / tau);
        const double target = s / var;
        return target / (1.0 + (target / w0 - 1.0) * std::exp(-2.0 * s * t / tau));
    };
    const double s_A = stats.sigma_yxA.norm();
    const double s_B = stats.sigma_yxB.norm();
    if ((s_A == 0.0 && u_A0 > 0.0) || (s_B == 0.0 && u_B0 > 0.0)) {
        throw Error(ErrorKind::NotSolvable, "aligned start is undefined for a zero correlation");
    }
    const RowVector dir_A = s_A > 0.0 ? RowVector(stats.sigma_yxA / s_A) : RowVector::Zero(stats.dims_A());
    const RowVector dir_B = s_B > 0.0 ? RowVector(stats.sigma_yxB / s_B) : RowVector::Zero(stats.dims_B());

    std::vector<TotalMaps> out;
    out.reserve(times.size());
    for (double t : times) {
        out.push_back(TotalMaps{magnitude(s_A, var_A, u_A0, t) * dir_A, magnitude(s_B, var_B, u_B0, t) * dir_B});
    }
    return out;
}

TheoryPrediction predict(const CorrelationStats& stats, const DepthSpec& depth, double u0, double tau) {
    check_u0(u0);
    const Ordered o = order(stats);
    TheoryPrediction p;
    p.first_modality = o.swapped ? Modality::B : Modality::A;
    p.k = o.k;
    const EffCorr e = eff_corr(o.s);
    p.eff_corr_norm = e.norm;

    const RowVector global = o.s.sigma_yx() * pseudo_inverse(o.s.sigma());
    p.misattribution = right_solve_spd(o.s.sigma_yxA, o.s.sigma_A) - global.head(o.s.dims_A());

    const int L = depth.L;
    const int L_f = depth.L_f;
    if (depth.is_unequal()) {
        const UnequalParts parts = unequal_parts(stats, depth, u0);
        const double I = integral_I_unequal(parts.L_A, parts.L_B, parts.L_c, parts.c).value;
        p.integral_value = I;
        p.ratio = ratio_unequal(stats, depth, u0);
        p.t_A = tau * std::pow(u0, 2 - parts.L_A - parts.L_c) / o.n_first * I;
    } else if (L_f == 1) {
        const double n = o.s.sigma_yx().norm();
        p.ratio = TimeRatio::finite(1.0);
        p.t_A = L == 2 ? tau * std::log(1.0 / u0) / n : tau * std::pow(u0, 2 - L) / ((L - 2) * n);
    } else if (L == 2) {
        const TwoLayerTimes t = times_two_layer(stats, u0, tau);
        p.ratio = ratio_two_layer(stats);
        p.t_A = t.t_A;
        p.t_B = t.t_B;
        return p;
    } else {
        const double k = o.k;
        const double I = L_f == 2 ? integral_I_fusion2(L, k).value : integral_I(L, L_f, k);
        p.integral_value = I;
        p.ratio = ratio_deep(stats, depth, u0);
        p.t_A = tau * std::pow(u0, 2 - L) / o.n_first * I;
    }
    p.t_B = p.ratio.is_finite() ? p.t_A * p.ratio.value() : std::numeric_limits<double>::infinity();
    return p;
}

}  // namespace unibias
