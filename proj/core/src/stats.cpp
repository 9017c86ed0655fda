#include "unibias/stats.hpp"

#include <cmath>
#include <random>
#include <string>

#include "unibias/errors.hpp"

namespace unibias {

DatasetSpec DatasetSpec::scalar(double sigma_A, double sigma_B, double rho, double w_A, double w_B,
                                double noise_std, LabelMode mode) {
    DatasetSpec spec;
    spec.dims_A = 1;
    spec.dims_B = 1;
    spec.sigma.resize(2, 2);
    spec.sigma << sigma_A * sigma_A, rho * sigma_A * sigma_B, rho * sigma_A * sigma_B,
        sigma_B * sigma_B;
    spec.w_star_A = RowVector::Constant(1, w_A);
    spec.w_star_B = RowVector::Constant(1, w_B);
    spec.noise_std = noise_std;
    spec.label_mode = mode;
    return spec;
}

DatasetSpec DatasetSpec::isotropic(int dims_A, int dims_B, double var_A, double var_B, double w_A,
                                   double w_B, double noise_std) {
    DatasetSpec spec;
    spec.dims_A = dims_A;
    spec.dims_B = dims_B;
    spec.sigma = Matrix::Zero(dims_A + dims_B, dims_A + dims_B);
    spec.sigma.topLeftCorner(dims_A, dims_A).diagonal().setConstant(var_A);
    spec.sigma.bottomRightCorner(dims_B, dims_B).diagonal().setConstant(var_B);
    spec.w_star_A = RowVector::Constant(dims_A, w_A);
    spec.w_star_B = RowVector::Constant(dims_B, w_B);
    spec.noise_std = noise_std;
    return spec;
}

RowVector DatasetSpec::w_star() const {
    RowVector w(w_star_A.size() + w_star_B.size());
    w << w_star_A, w_star_B;
    return w;
}

void DatasetSpec::validate() const {
    if (dims_A < 1) throw ValidationError("dataset.dims_A", "must be a positive integer");
    if (dims_B < 1) throw ValidationError("dataset.dims_B", "must be a positive integer");
    const int d = dims_A + dims_B;
    if (sigma.rows() != d || sigma.cols() != d) {
        throw ValidationError("dataset.sigma", "must be a " + std::to_string(d) + "x" +
                                                   std::to_string(d) + " matrix");
    }
    if (!is_symmetric(sigma)) throw ValidationError("dataset.sigma", "must be symmetric");
    if (w_star_A.size() != dims_A) throw ValidationError("dataset.w_A", "length must equal dims_A");
    if (w_star_B.size() != dims_B) throw ValidationError("dataset.w_B", "length must equal dims_B");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
        throw ValidationError("dataset.noise_std", "must be a finite non-negative real");
    }
}

Matrix CorrelationStats::sigma() const { return assemble_blocks(sigma_A, sigma_AB, sigma_B); }

RowVector CorrelationStats::sigma_yx() const {
    RowVector r(sigma_yxA.size() + sigma_yxB.size());
    r << sigma_yxA, sigma_yxB;
    return r;
}

CorrelationStats CorrelationStats::swapped() const {
    CorrelationStats s;
    s.sigma_A = sigma_B;
    s.sigma_B = sigma_A;
    s.sigma_AB = sigma_AB.transpose();
    s.sigma_yxA = sigma_yxB;
    s.sigma_yxB = sigma_yxA;
    s.y_sq = y_sq;
    s.sample_count = sample_count;
    return s;
}

CorrelationStats CorrelationStats::from_moments(const Matrix& sigma, int dims_A,
                                                const RowVector& sigma_yx, double y_sq) {
    const auto d = sigma.rows();
    if (sigma.cols() != d || sigma_yx.size() != d || dims_A < 1 || dims_A >= d) {
        throw Error(ErrorKind::DimensionMismatch, "moment shapes are inconsistent");
    }
    if (!is_symmetric(sigma) || !is_positive_semidefinite(sigma)) {
        throw Error(ErrorKind::NonPositiveDefinite, "sigma must be symmetric positive semidefinite");
    }
    if (!(y_sq >= 0.0)) throw Error(ErrorKind::Validation, "y_sq must be non-negative");
    const auto db = d - dims_A;
    CorrelationStats s;
    s.sigma_A = sigma.topLeftCorner(dims_A, dims_A);
    s.sigma_B = sigma.bottomRightCorner(db, db);
    s.sigma_AB = sigma.topRightCorner(dims_A, db);
    s.sigma_yxA = sigma_yx.head(dims_A);
    s.sigma_yxB = sigma_yx.tail(db);
    s.y_sq = y_sq;
    return s;
}

CorrelationStats build_correlations(const DatasetSpec& spec) {
    spec.validate();
    if (!is_positive_definite(spec.sigma)) {
        throw Error(ErrorKind::NonPositiveDefinite, "input correlation matrix is not positive definite");
    }
    const RowVector w = spec.w_star();
    const RowVector yx = w * spec.sigma;
    const double y_sq = w.dot(yx) + spec.noise_std * spec.noise_std;
    return CorrelationStats::from_moments(spec.sigma, spec.dims_A, yx, y_sq);
}

SampleSet sample_dataset(const DatasetSpec& spec, long P, std::uint64_t seed) {
    spec.validate();
    if (P < 1) throw ValidationError("P", "sample count must be at least 1");
    Eigen::LLT<Matrix> llt(spec.sigma);
    if (llt.info() != Eigen::Success || !is_positive_definite(spec.sigma)) {
        throw Error(ErrorKind::NonPositiveDefinite, "Cholesky factorization failed");
    }
    const Matrix chol = llt.matrixL();
    const int d = spec.dims_A + spec.dims_B;
    const RowVector w = spec.w_star();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    SampleSet out;
    out.dims_A = spec.dims_A;
    out.dims_B = spec.dims_B;
    out.seed = seed;
    out.inputs.resize(P, d);
    out.targets.resize(P);
    Vector z(d);
    for (long mu = 0; mu < P; ++mu) {
        for (int i = 0; i < d; ++i) z(i) = normal(rng);
        const Vector x = chol * z;
        out.inputs.row(mu) = x.transpose();
        double y = w.dot(x.transpose());
        if (spec.noise_std > 0.0) y += spec.noise_std * normal(rng);
        if (spec.label_mode == LabelMode::Sign) y = y >= 0.0 ? 1.0 : -1.0;
        out.targets(mu) = y;
    }
    return out;
}

CorrelationStats empirical_moments(const SampleSet& samples, bool center) {
    const long P = samples.size();
    const auto d = samples.inputs.cols();
    if (P < 1) throw Error(ErrorKind::RankDeficient, "empty sample set");
    if (d != samples.dims_A + samples.dims_B || samples.targets.size() != P) {
        throw Error(ErrorKind::DimensionMismatch, "sample set shapes are inconsistent");
    }
    Matrix X = samples.inputs;
    Vector y = samples.targets;
    if (center) {
        const RowVector mean = X.colwise().mean();
        X.rowwise() -= mean;
        y.array() -= y.mean();
    }
    const double inv_p = 1.0 / static_cast<double>(P);
    Matrix sigma = (X.transpose() * X) * inv_p;
    sigma = 0.5 * (sigma + sigma.transpose());
    const RowVector yx = (y.transpose() * X) * inv_p;
    const double y_sq = y.squaredNorm() * inv_p;
    auto stats = CorrelationStats::from_moments(sigma, samples.dims_A, yx, y_sq);
    stats.sample_count = P;
    return stats;
}

CorrelationStats estimate_correlations(const SampleSet& samples, bool center) {
    auto stats = empirical_moments(samples, center);
    if (!is_positive_definite(stats.sigma())) {
        throw Error(ErrorKind::RankDeficient, "empirical input correlation is not full rank");
    }
    return stats;
}

RowVector effective_correlation_B(const CorrelationStats& stats) {
    const RowVector coef = right_solve_spd(stats.sigma_yxA, stats.sigma_A);
    return stats.sigma_yxB - coef * stats.sigma_AB;
}

}  // namespace unibias
