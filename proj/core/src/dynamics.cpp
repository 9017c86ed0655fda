#include "unibias/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace unibias {

void TrainConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("training.eta", "must be a positive real");
    if (max_steps < 0) throw ValidationError("training.max_steps", "must be non-negative");
    if (record_stride < 1) throw ValidationError("training.record_stride", "must be at least 1");
    if (!(stop_loss >= 0.0)) throw ValidationError("training.stop_loss", "must be non-negative");
}

DivergedError::DivergedError(const std::string& message, Trajectory partial)
    : Error(ErrorKind::Diverged, message), partial_(std::move(partial)) {}

double BalanceReport::max_relative() const { return std::max({stack_rel, mixed_rel, norm_rel}); }

ErrorCorrelations error_correlations(const CorrelationStats& stats, const TotalMaps& maps) {
    if (maps.w_tot_A.size() != stats.dims_A() || maps.w_tot_B.size() != stats.dims_B()) {
        throw Error(ErrorKind::DimensionMismatch, "total maps do not match the statistics");
    }
    ErrorCorrelations e;
    e.e_A = stats.sigma_yxA - maps.w_tot_A * stats.sigma_A - maps.w_tot_B * stats.sigma_AB.transpose();
    e.e_B = stats.sigma_yxB - maps.w_tot_B * stats.sigma_B - maps.w_tot_A * stats.sigma_AB;
    return e;
}

double loss_from_stats(const CorrelationStats& stats, const TotalMaps& maps) {
    const RowVector w = maps.concatenated();
    const double quad = (w * stats.sigma() * w.transpose())(0, 0);
    return 0.5 * (stats.y_sq - 2.0 * w.dot(stats.sigma_yx()) + quad);
}

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void check_labels(const SampleSet& samples, LossKind loss) {
    if (loss != LossKind::Logistic) return;
    for (Eigen::Index i = 0; i < samples.targets.size(); ++i) {
        const double y = samples.targets(i);
        if (y != 1.0 && y != -1.0) {
            throw Error(ErrorKind::BadLabels, "logistic loss requires targets in {-1, +1}");
        }
    }
}

// Loss and dloss/dyhat (already divided by P) for a batch of outputs.
double output_gradient(const Vector& yhat, const Vector& y, LossKind loss, Vector* grad) {
    const double inv_p = 1.0 / static_cast<double>(y.size());
    double total = 0.0;
    if (grad) grad->resize(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (loss == LossKind::Mse) {
            const double r = yhat(i) - y(i);
            total += 0.5 * r * r;
            if (grad) (*grad)(i) = r * inv_p;
        } else {
            const double m = y(i) * yhat(i);
            total += softplus(-m);
            // d/dyhat ln(1 + e^{-y yhat}) = -y sigmoid(-y yhat)
            if (grad) (*grad)(i) = -y(i) / (1.0 + std::exp(m)) * inv_p;
        }
    }
    return total * inv_p;
}

// Forward products of a linear network needed for one update.
struct LinearPass {
    std::vector<Matrix> in_A;  // in_A[i]: product of layers before layer i on branch A (i >= 1)
    std::vector<Matrix> in_B;
    std::vector<RowVector> out_A;  // out_A[i]: product of layers after layer i, branch A
    std::vector<RowVector> out_B;
    TotalMaps maps;
};

const Matrix& layer(const FusionNetwork& net, bool branch_a, int i) {
    const int lf = net.config.L_f;
    if (i < lf) return branch_a ? net.pre_A[i] : net.pre_B[i];
    return net.post[i - lf];
}

LinearPass linear_pass(const FusionNetwork& net) {
    const int L = net.config.L;
    LinearPass p;
    p.in_A.resize(L + 1);
    p.in_B.resize(L + 1);
    p.in_A[1] = net.pre_A[0];
    p.in_B[1] = net.pre_B[0];
    for (int i = 1; i < L; ++i) {
        p.in_A[i + 1] = layer(net, true, i) * p.in_A[i];
        p.in_B[i + 1] = layer(net, false, i) * p.in_B[i];
    }
    p.maps.w_tot_A = p.in_A[L].row(0);
    p.maps.w_tot_B = p.in_B[L].row(0);

    p.out_A.resize(L);
    p.out_B.resize(L);
    p.out_A[L - 1] = RowVector::Ones(1);
    p.out_B[L - 1] = RowVector::Ones(1);
    for (int i = L - 2; i >= 0; --i) {
        p.out_A[i] = p.out_A[i + 1] * layer(net, true, i + 1);
        p.out_B[i] = p.out_B[i + 1] * layer(net, false, i + 1);
    }
    return p;
}

// Applies W_i += eta * out_i^T (e * in_i^T) for every layer.
void apply_linear_update(FusionNetwork& net, const LinearPass& p, const ErrorCorrelations& e,
                         double eta) {
    const int L = net.config.L;
    const int lf = net.config.L_f;
    for (int i = 0; i < L; ++i) {
        if (i < lf) {
            const RowVector r_A = i == 0 ? e.e_A : RowVector(e.e_A * p.in_A[i].transpose());
            const RowVector r_B = i == 0 ? e.e_B : RowVector(e.e_B * p.in_B[i].transpose());
            net.pre_A[i].noalias() += eta * p.out_A[i].transpose() * r_A;
            net.pre_B[i].noalias() += eta * p.out_B[i].transpose() * r_B;
        } else {
            const RowVector r = e.e_A * p.in_A[i].transpose() + e.e_B * p.in_B[i].transpose();
            net.post[i - lf].noalias() += eta * p.out_A[i].transpose() * r;
        }
    }
}

void require_linear(const FusionNetwork& net) {
    if (net.config.activation != Activation::Linear) {
        throw Error(ErrorKind::NotLinear, "correlation drive requires a linear network");
    }
}

Vector linear_outputs(const TotalMaps& maps, const SampleSet& s) {
    return s.inputs.leftCols(s.dims_A) * maps.w_tot_A.transpose() +
           s.inputs.rightCols(s.dims_B) * maps.w_tot_B.transpose();
}

// Cached forward pass of a (possibly ReLU) network over a sample batch.
struct BatchPass {
    std::vector<Matrix> h_A, h_B;  // pre-fusion branch activations, h_A[0] = X_A^T
    std::vector<Matrix> h_post;    // inputs to the post-fusion layers
    Vector yhat;
};

// Products with a tiny inner dimension (outer products, scalar-input layers)
// skip the blocked GEMM path, whose packing and zeroing dominate otherwise.
template <typename A, typename B>
Matrix mul(const A& a, const B& b) {
    if (a.cols() > 4) return a * b;
    Matrix r = a.col(0) * b.row(0);
    for (Eigen::Index k = 1; k < a.cols(); ++k) r.noalias() += a.col(k) * b.row(k);
    return r;
}

void activate(Matrix& z, bool relu) {
    if (relu) z = z.cwiseMax(0.0);
}

BatchPass batch_forward(const FusionNetwork& net, const Matrix& inputs) {
    const auto& cfg = net.config;
    const bool relu = cfg.activation == Activation::Relu;
    BatchPass b;
    b.h_A.push_back(inputs.leftCols(cfg.dims_A).transpose());
    b.h_B.push_back(inputs.rightCols(cfg.dims_B).transpose());
    for (int l = 0; l + 1 < cfg.L_f; ++l) {
        b.h_A.push_back(mul(net.pre_A[l], b.h_A.back()));
        b.h_B.push_back(mul(net.pre_B[l], b.h_B.back()));
        activate(b.h_A.back(), relu);
        activate(b.h_B.back(), relu);
    }
    Matrix z = mul(net.pre_A.back(), b.h_A.back());
    z.noalias() += mul(net.pre_B.back(), b.h_B.back());
    for (const auto& w : net.post) {
        activate(z, relu);
        b.h_post.push_back(std::move(z));
        z = mul(w, b.h_post.back());
    }
    b.yhat = z.row(0).transpose();
    return b;
}

// Zeroes the backpropagated signal where the unit was inactive (h = relu(z) > 0 iff z > 0).
void mask_inactive(Matrix& back, const Matrix& h) {
    back.array() *= (h.array() > 0.0).cast<double>();
}

struct Gradients {
    std::vector<Matrix> pre_A, pre_B, post;
};

Gradients zero_gradients(const FusionNetwork& net) {
    Gradients g;
    for (const auto& w : net.pre_A) g.pre_A.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& w : net.pre_B) g.pre_B.push_back(Matrix::Zero(w.rows(), w.cols()));
    for (const auto& w : net.post) g.post.push_back(Matrix::Zero(w.rows(), w.cols()));
    return g;
}

// Adds dloss/dW for one batch to g, given dloss/dyhat for that batch.
void backprop(const FusionNetwork& net, const BatchPass& b, const Vector& grad, Gradients& g) {
    const bool relu = net.config.activation == Activation::Relu;
    Matrix delta = grad.transpose();  // 1 x n, dloss/dz at the output layer
    for (int j = static_cast<int>(net.post.size()) - 1; j >= 0; --j) {
        g.post[j].noalias() += delta * b.h_post[j].transpose();
        Matrix back = mul(net.post[j].transpose(), delta);
        if (relu) mask_inactive(back, b.h_post[j]);
        delta = std::move(back);
    }
    // delta is now dloss/dz at the fusion layer.
    Matrix delta_A = delta;
    Matrix delta_B = std::move(delta);
    for (int l = net.config.L_f - 1; l >= 0; --l) {
        g.pre_A[l].noalias() += delta_A * b.h_A[l].transpose();
        g.pre_B[l].noalias() += delta_B * b.h_B[l].transpose();
        if (l == 0) break;
        Matrix back_A = mul(net.pre_A[l].transpose(), delta_A);
        Matrix back_B = mul(net.pre_B[l].transpose(), delta_B);
        if (relu) {
            mask_inactive(back_A, b.h_A[l]);
            mask_inactive(back_B, b.h_B[l]);
        }
        delta_A = std::move(back_A);
        delta_B = std::move(back_B);
    }
}

constexpr Eigen::Index kChunk = 256;

// Loss, predictions and full-batch gradients of a nonlinear network. Samples are
// processed in chunks so the hidden activations stay cache resident.
double nonlinear_pass(const FusionNetwork& net, const SampleSet& s, LossKind loss, Vector& yhat, Gradients& g) {
    const Eigen::Index p = s.size();
    g = zero_gradients(net);
    yhat.resize(p);
    double total = 0.0;
    Vector grad;
    for (Eigen::Index start = 0; start < p; start += kChunk) {
        const Eigen::Index n = std::min(kChunk, p - start);
        const BatchPass b = batch_forward(net, s.inputs.middleRows(start, n));
        const double w = static_cast<double>(n) / static_cast<double>(p);
        total += w * output_gradient(b.yhat, s.targets.segment(start, n), loss, &grad);
        grad *= w;
        yhat.segment(start, n) = b.yhat;
        backprop(net, b, grad, g);
    }
    return total;
}

void apply_gradients(FusionNetwork& net, const Gradients& g, double eta) {
    for (std::size_t l = 0; l < net.pre_A.size(); ++l) {
        net.pre_A[l] -= eta * g.pre_A[l];
        net.pre_B[l] -= eta * g.pre_B[l];
    }
    for (std::size_t j = 0; j < net.post.size(); ++j) net.post[j] -= eta * g.post[j];
}

void check_sample_shapes(const FusionNetwork& net, const SampleSet& s) {
    if (s.dims_A != net.config.dims_A || s.dims_B != net.config.dims_B ||
        s.inputs.cols() != s.dims_A + s.dims_B || s.targets.size() != s.inputs.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "sample set does not match the network");
    }
    if (s.size() < 1) throw Error(ErrorKind::DimensionMismatch, "empty sample set");
}

ErrorCorrelations map_gradient(const SampleSet& s, const Vector& grad) {
    // e = -dloss/dW_tot
    const RowVector g = -(grad.transpose() * s.inputs);
    return ErrorCorrelations{g.head(s.dims_A), g.tail(s.dims_B)};
}

}  // namespace

double gd_step_correlation(FusionNetwork& net, const CorrelationStats& stats, double eta) {
    require_linear(net);
    const LinearPass p = linear_pass(net);
    const double loss = loss_from_stats(stats, p.maps);
    apply_linear_update(net, p, error_correlations(stats, p.maps), eta);
    return loss;
}

double gd_step_samples(FusionNetwork& net, const SampleSet& samples, double eta, LossKind loss) {
    check_sample_shapes(net, samples);
    check_labels(samples, loss);
    Vector grad;
    if (net.config.activation == Activation::Linear) {
        const LinearPass p = linear_pass(net);
        const double value = output_gradient(linear_outputs(p.maps, samples), samples.targets, loss, &grad);
        apply_linear_update(net, p, map_gradient(samples, grad), eta);
        return value;
    }
    Vector yhat;
    Gradients g;
    const double value = nonlinear_pass(net, samples, loss, yhat, g);
    apply_gradients(net, g, eta);
    return value;
}

double sample_loss(const FusionNetwork& net, const SampleSet& samples, LossKind loss) {
    check_sample_shapes(net, samples);
    return output_gradient(forward_batch(net, samples.inputs), samples.targets, loss, nullptr);
}

namespace {

Matrix readout_operator(const SampleSet& s) {
    const Matrix sigma = (s.inputs.transpose() * s.inputs) / static_cast<double>(s.size());
    return pseudo_inverse(sigma);
}

TotalMaps readout(const Vector& yhat, const SampleSet& s, const Matrix& pinv) {
    const RowVector c = (yhat.transpose() * s.inputs) / static_cast<double>(s.size());
    const RowVector w = c * pinv;
    return TotalMaps{w.head(s.dims_A), w.tail(s.dims_B)};
}

}  // namespace

TotalMaps effective_maps(const FusionNetwork& net, const SampleSet& samples) {
    if (net.config.activation == Activation::Linear) return total_maps(net);
    check_sample_shapes(net, samples);
    return readout(forward_batch(net, samples.inputs), samples, readout_operator(samples));
}

namespace {

struct Recorder {
    const TrainConfig& config;
    const CorrelationStats* population;
    const StopObserver& observer;
    Trajectory traj;
    bool halted = false;
    double initial_loss = std::numeric_limits<double>::quiet_NaN();

    void push(long step, const FusionNetwork& net, const TotalMaps& maps, double loss) {
        TrajectorySample s;
        s.step = step;
        s.time = static_cast<double>(step) * config.eta;
        s.loss = loss;
        s.w_tot_A = maps.w_tot_A;
        s.w_tot_B = maps.w_tot_B;
        s.norm_wtot_A = maps.w_tot_A.norm();
        s.norm_wtot_B = maps.w_tot_B.norm();
        const LayerNorms n = layer_norms(net);
        s.u_A = n.u_A;
        s.u_B = n.u_B;
        s.u = n.u;
        if (population) s.gen_error = loss_from_stats(*population, maps);
        if (config.record_first_layer) {
            s.first_layer_A = net.pre_A.front();
            s.first_layer_B = net.pre_B.front();
        }
        traj.samples.push_back(std::move(s));
        if (observer && observer(traj.samples.back())) halted = true;
    }

    bool should_record(long step, bool last) const {
        return last || step % config.record_stride == 0;
    }

    template <class MapsFn>
    void guard(long step, const FusionNetwork& net, MapsFn&& maps, double loss) {
        if (std::isnan(initial_loss)) initial_loss = loss;
        const bool blown = !std::isfinite(loss) || (initial_loss > 0.0 && loss > 1e6 * initial_loss);
        if (!blown) return;
        push(step, net, maps(), loss);
        throw DivergedError("loss exceeded 1e6 times its initial value at step " + std::to_string(step),
                            std::move(traj));
    }
};

}  // namespace

Trajectory train(FusionNetwork& net, const CorrelationStats& stats, const TrainConfig& config,
                 const CorrelationStats* population, const StopObserver& observer) {
    config.validate();
    require_linear(net);
    if (config.loss_kind != LossKind::Mse) {
        throw ValidationError("training.loss", "correlation drive supports only mse loss");
    }
    Recorder rec{config, population, observer, {}, false, std::numeric_limits<double>::quiet_NaN()};
    rec.traj.eta = config.eta;
    for (long step = 0;; ++step) {
        const LinearPass p = linear_pass(net);
        const double loss = loss_from_stats(stats, p.maps);
        const bool stop = loss <= config.stop_loss || step >= config.max_steps;
        rec.guard(step, net, [&] { return p.maps; }, loss);
        if (rec.should_record(step, stop)) rec.push(step, net, p.maps, loss);
        if (stop || rec.halted) break;
        apply_linear_update(net, p, error_correlations(stats, p.maps), config.eta);
    }
    return std::move(rec.traj);
}

Trajectory train(FusionNetwork& net, const SampleSet& samples, const TrainConfig& config,
                 const CorrelationStats* population, const StopObserver& observer) {
    config.validate();
    check_sample_shapes(net, samples);
    check_labels(samples, config.loss_kind);
    Recorder rec{config, population, observer, {}, false, std::numeric_limits<double>::quiet_NaN()};
    rec.traj.eta = config.eta;
    const bool linear = net.config.activation == Activation::Linear;
    const Matrix pinv = linear ? Matrix() : readout_operator(samples);
    Vector grad, yhat;
    Gradients g;
    for (long step = 0;; ++step) {
        if (linear) {
            const LinearPass p = linear_pass(net);
            const double loss =
                output_gradient(linear_outputs(p.maps, samples), samples.targets, config.loss_kind, &grad);
            const bool stop = loss <= config.stop_loss || step >= config.max_steps;
            rec.guard(step, net, [&] { return p.maps; }, loss);
            if (rec.should_record(step, stop)) rec.push(step, net, p.maps, loss);
            if (stop || rec.halted) break;
            apply_linear_update(net, p, map_gradient(samples, grad), config.eta);
        } else {
            const double loss = nonlinear_pass(net, samples, config.loss_kind, yhat, g);
            const bool stop = loss <= config.stop_loss || step >= config.max_steps;
            const auto maps = [&] { return readout(yhat, samples, pinv); };
            rec.guard(step, net, maps, loss);
            if (rec.should_record(step, stop)) rec.push(step, net, maps(), loss);
            if (stop || rec.halted) break;
            apply_gradients(net, g, config.eta);
        }
    }
    return std::move(rec.traj);
}

std::optional<double> crossing_time(const Trajectory& traj, Modality which, double level) {
    const auto norm = [which](const TrajectorySample& s) {
        return which == Modality::A ? s.norm_wtot_A : s.norm_wtot_B;
    };
    const auto& xs = traj.samples;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double v = norm(xs[i]);
        if (v < level) continue;
        if (i == 0) return xs[0].time;
        const double v0 = norm(xs[i - 1]);
        const double frac = v > v0 ? (level - v0) / (v - v0) : 1.0;
        return xs[i - 1].time + frac * (xs[i].time - xs[i - 1].time);
    }
    return std::nullopt;
}

PhaseTargets phase_targets(const CorrelationStats& stats) {
    const bool a_faster = stats.sigma_yxA.norm() >= stats.sigma_yxB.norm();
    const RowVector global = stats.sigma_yx() * pseudo_inverse(stats.sigma());
    PhaseTargets t;
    t.faster = a_faster ? Modality::A : Modality::B;
    if (a_faster) {
        t.target_A = right_solve_spd(stats.sigma_yxA, stats.sigma_A).norm();
        t.target_B = global.tail(stats.dims_B()).norm();
    } else {
        t.target_B = right_solve_spd(stats.sigma_yxB, stats.sigma_B).norm();
        t.target_A = global.head(stats.dims_A()).norm();
    }
    return t;
}

PhaseTimes detect_phase_times(const Trajectory& traj, const CorrelationStats& stats) {
    if (traj.empty()) throw Error(ErrorKind::NoCrossing, "empty trajectory");
    const PhaseTargets targets = phase_targets(stats);
    PhaseTimes out;
    out.target_A = targets.target_A;
    out.target_B = targets.target_B;
    const auto cross = [&](Modality m, double target) -> std::optional<double> {
        if (!(target > 0.0)) return std::nullopt;
        return crossing_time(traj, m, 0.5 * target);
    };
    const auto t_A = cross(Modality::A, out.target_A);
    const auto t_B = cross(Modality::B, out.target_B);
    if (!t_A && !t_B) throw Error(ErrorKind::NoCrossing, "neither modality reached half its target");
    const bool a_first = t_A && (!t_B || *t_A <= *t_B);
    out.first_modality = a_first ? Modality::A : Modality::B;
    out.t_first = a_first ? *t_A : *t_B;
    out.t_second = a_first ? t_B : t_A;
    out.plateau_first = a_first ? out.target_A : out.target_B;
    return out;
}

double plateau_loss(const Trajectory& traj, const PhaseTimes& phases) {
    const auto& xs = traj.samples;
    const double end = phases.t_second.value_or(std::numeric_limits<double>::infinity());
    double best_slope = std::numeric_limits<double>::infinity();
    std::optional<double> best;
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        if (xs[i].time < phases.t_first || xs[i].time > end) continue;
        const double slope = std::abs((xs[i + 1].loss - xs[i - 1].loss) / (xs[i + 1].time - xs[i - 1].time));
        if (slope < best_slope) {
            best_slope = slope;
            best = xs[i].loss;
        }
    }
    if (!best) throw Error(ErrorKind::NoCrossing, "no recorded samples inside the plateau");
    return *best;
}

BalanceReport check_balancing(const FusionNetwork& net) {
    if (net.config.activation != Activation::Linear) {
        throw Error(ErrorKind::NotLinear, "balancing identities hold for linear networks only");
    }
    BalanceReport r;
    // Residuals are normalized by the larger Gram norm, floored at 1 so that
    // the conserved O(u0^2) offset from a small random init reads as small.
    const auto rel = [](double abs, double a, double b) { return abs == 0.0 ? 0.0 : abs / std::max({a, b, 1.0}); };
    const auto pair = [&](const Matrix& lower, const Matrix& upper) {
        const Matrix g_out = lower * lower.transpose();
        const Matrix g_in = upper.transpose() * upper;
        const double abs = (g_out - g_in).norm();
        r.stack_abs = std::max(r.stack_abs, abs);
        r.stack_rel = std::max(r.stack_rel, rel(abs, g_out.norm(), g_in.norm()));
    };
    for (std::size_t l = 0; l + 1 < net.pre_A.size(); ++l) {
        pair(net.pre_A[l], net.pre_A[l + 1]);
        pair(net.pre_B[l], net.pre_B[l + 1]);
    }
    for (std::size_t j = 0; j + 1 < net.post.size(); ++j) pair(net.post[j], net.post[j + 1]);
    if (!net.post.empty()) {
        const Matrix g_out = net.pre_A.back() * net.pre_A.back().transpose() +
                             net.pre_B.back() * net.pre_B.back().transpose();
        const Matrix g_in = net.post.front().transpose() * net.post.front();
        r.mixed_abs = (g_out - g_in).norm();
        r.mixed_rel = rel(r.mixed_abs, g_out.norm(), g_in.norm());
        const LayerNorms n = layer_norms(net);
        r.norm_abs = std::abs(n.u_A * n.u_A + n.u_B * n.u_B - n.u * n.u);
        r.norm_rel = rel(r.norm_abs, n.u_A * n.u_A + n.u_B * n.u_B, n.u * n.u);
    }
    return r;
}

}  // namespace unibias
