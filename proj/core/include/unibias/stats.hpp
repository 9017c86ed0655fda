#pragma once

#include <cstdint>
#include <optional>

#include "unibias/linalg.hpp"

namespace unibias {

enum class LabelMode { Regression, Sign };

struct DatasetSpec {
    int dims_A = 1;
    int dims_B = 1;
    Matrix sigma;  // (dims_A + dims_B) square, blocks ordered A then B
    RowVector w_star_A;
    RowVector w_star_B;
    double noise_std = 0.0;
    LabelMode label_mode = LabelMode::Regression;

    // 2x2 parameterization: Var(x_A)=sigma_A^2, Var(x_B)=sigma_B^2,
    // Cov = rho sigma_A sigma_B.
    static DatasetSpec scalar(double sigma_A, double sigma_B, double rho, double w_A, double w_B,
                              double noise_std = 0.0, LabelMode mode = LabelMode::Regression);

    // Uncorrelated blocks Sigma_A = var_A I, Sigma_B = var_B I with constant
    // target weights.
    static DatasetSpec isotropic(int dims_A, int dims_B, double var_A, double var_B, double w_A,
                                 double w_B, double noise_std = 0.0);

    RowVector w_star() const;
    // Throws ValidationError on inconsistent shapes or negative noise.
    void validate() const;
};

struct CorrelationStats {
    Matrix sigma_A;
    Matrix sigma_B;
    Matrix sigma_AB;
    RowVector sigma_yxA;
    RowVector sigma_yxB;
    double y_sq = 0.0;
    // Empty for analytic statistics, sample count for empirical ones.
    std::optional<long> sample_count;

    int dims_A() const { return static_cast<int>(sigma_A.rows()); }
    int dims_B() const { return static_cast<int>(sigma_B.rows()); }
    Matrix sigma() const;
    RowVector sigma_yx() const;
    // Modality blocks exchanged (A <-> B).
    CorrelationStats swapped() const;

    // Builds statistics from raw moments. Requires only a symmetric positive
    // semidefinite sigma, so singular (collinear) inputs are accepted.
    static CorrelationStats from_moments(const Matrix& sigma, int dims_A, const RowVector& sigma_yx,
                                         double y_sq);
};

struct SampleSet {
    int dims_A = 1;
    int dims_B = 1;
    Matrix inputs;   // P x (dims_A + dims_B)
    Vector targets;  // P
    std::uint64_t seed = 0;

    long size() const { return static_cast<long>(inputs.rows()); }
};

CorrelationStats build_correlations(const DatasetSpec& spec);

SampleSet sample_dataset(const DatasetSpec& spec, long P, std::uint64_t seed);

// Empirical second moments. Inputs and targets are centered unless
// `center` is false.
CorrelationStats estimate_correlations(const SampleSet& samples, bool center = true);

// Same moments without the full-rank requirement. Used when P is smaller
// than the input dimension and the empirical Sigma is singular.
CorrelationStats empirical_moments(const SampleSet& samples, bool center = true);

// Sigma_yxB - Sigma_yxA Sigma_A^{-1} Sigma_AB.
RowVector effective_correlation_B(const CorrelationStats& stats);

}  // namespace unibias
