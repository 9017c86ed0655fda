#pragma once

#include <optional>
#include <string>
#include <vector>

#include "unibias/dynamics.hpp"
#include "unibias/network.hpp"
#include "unibias/quadrature.hpp"
#include "unibias/stats.hpp"

namespace unibias {

struct Manifolds {
    RowVector m_star_A;
    RowVector m_star_B;
    RowVector m_A_saddle;
    RowVector m_B_saddle;
};

struct DepthSpec {
    int L = 2;
    int L_f = 2;
    // Unequal-depth variant: pre-fusion depths of each branch and the
    // post-fusion depth. All three are set together.
    std::optional<int> L_A;
    std::optional<int> L_B;
    std::optional<int> L_c;

    static DepthSpec uniform(int L, int L_f) { return DepthSpec{L, L_f, {}, {}, {}}; }
    static DepthSpec unequal(int L_A, int L_B, int L_c);
    bool is_unequal() const { return L_A.has_value(); }
};

// t_B / t_A, or a divergent marker when the second modality is never
// learned (vanishing effective correlation).
class TimeRatio {
public:
    static TimeRatio finite(double value);
    static TimeRatio divergent(double residual_norm);

    bool is_finite() const { return finite_; }
    // Throws Error(CollinearModalities) when divergent.
    double value() const;
    // Norm of the effective correlation that vanished (divergent case).
    double residual_norm() const { return residual_; }
    // The ratio as a double, +inf when divergent.
    double as_double() const;
    std::string to_string() const;

private:
    bool finite_ = true;
    double value_ = 1.0;
    double residual_ = 0.0;
};

struct SaddleLosses {
    double loss_at_MA = 0.0;
    double loss_at_MB = 0.0;
};

struct Preference {
    Modality first = Modality::A;
    bool superficial = false;
};

struct TwoLayerTimes {
    double t_A = 0.0;  // first-learned modality
    double t_B = 0.0;  // second, +inf when divergent
};

struct TheoryPrediction {
    Modality first_modality = Modality::A;
    double t_A = 0.0;  // time of the first-learned modality
    double t_B = 0.0;  // time of the second, +inf when divergent
    TimeRatio ratio;
    double k = 1.0;
    double eff_corr_norm = 0.0;
    // Plateau deviation of the first-learned modality.
    RowVector misattribution;
    std::optional<double> integral_value;
};

Manifolds fixed_points(const CorrelationStats& stats);

SaddleLosses saddle_losses(const CorrelationStats& stats);

// Throws Error(Tie) when ||Sigma_yxA|| and ||Sigma_yxB|| agree to 1e-12
// relative.
Preference superficial_preference(const CorrelationStats& stats);

RowVector misattribution(const CorrelationStats& stats);

// Relabels internally so the larger ||Sigma_yx|| modality comes first.
TwoLayerTimes times_two_layer(const CorrelationStats& stats, double u0, double tau);

TimeRatio ratio_two_layer(const CorrelationStats& stats);

// Integral I(L, L_f) for 2 < L_f <= L at correlation ratio k in (0, 1].
double integral_I(int L, int L_f, double k, double tol = 1e-8);
QuadResult integral_I_detail(int L, int L_f, double k, double tol = 1e-8);

// Integral for the L_f = 2 < L case.
QuadResult integral_I_fusion2(int L, double k, double tol = 1e-8);

// Unequal-depth integral; `c` is the prefactor of (x^{2-L_A} - 1).
QuadResult integral_I_unequal(int L_A, int L_B, int L_c, double c, double tol = 1e-8);

TimeRatio ratio_deep(const CorrelationStats& stats, const DepthSpec& depth, double u0);

TimeRatio ratio_unequal(const CorrelationStats& stats, const DepthSpec& depth, double u0);

// Closed-form total maps for whitened, uncorrelated data from a balanced,
// aligned two-layer start with initial total-map norms u_A0 and u_B0.
std::vector<TotalMaps> exact_trajectory(const CorrelationStats& stats, double u_A0, double u_B0,
                                        double tau, const std::vector<double>& times);

TheoryPrediction predict(const CorrelationStats& stats, const DepthSpec& depth, double u0, double tau);

}  // namespace unibias
