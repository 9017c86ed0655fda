#include "unibias/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "unibias/errors.hpp"

namespace unibias {

void FusionConfig::validate() const {
    if (L < 1) throw ValidationError("network.L", "total depth must be at least 1");
    if (L_f < 1) throw ValidationError("network.L_f", "fusion layer must be at least 1");
    if (L_f > L) throw ValidationError("network.L_f", "fusion layer must not exceed L");
    if (width < 1) throw ValidationError("network.width", "width must be a positive integer");
    if (dims_A < 1) throw ValidationError("network.dims_A", "must be a positive integer");
    if (dims_B < 1) throw ValidationError("network.dims_B", "must be a positive integer");
    if (!(init.scale >= 0.0) || !std::isfinite(init.scale)) {
        throw ValidationError("network.init_scale", "must be a finite non-negative real");
    }
    if (!(init.post_gain >= 0.0) || !std::isfinite(init.post_gain)) {
        throw ValidationError("network.post_gain", "must be a finite non-negative real");
    }
}

RowVector TotalMaps::concatenated() const {
    RowVector r(w_tot_A.size() + w_tot_B.size());
    r << w_tot_A, w_tot_B;
    return r;
}

int layer_out_dim(const FusionConfig& config, int l) { return l == config.L ? 1 : config.width; }

namespace {

int layer_in_dim(const FusionConfig& config, int l, int input_dims) {
    return l == 1 ? input_dims : config.width;
}

}  // namespace

FusionNetwork zero_network(const FusionConfig& config) {
    config.validate();
    FusionNetwork net;
    net.config = config;
    for (int l = 1; l <= config.L_f; ++l) {
        const int out = layer_out_dim(config, l);
        net.pre_A.push_back(Matrix::Zero(out, layer_in_dim(config, l, config.dims_A)));
        net.pre_B.push_back(Matrix::Zero(out, layer_in_dim(config, l, config.dims_B)));
    }
    for (int l = config.L_f + 1; l <= config.L; ++l) {
        net.post.push_back(Matrix::Zero(layer_out_dim(config, l), config.width));
    }
    return net;
}

FusionNetwork init_network(const FusionConfig& config) {
    FusionNetwork net = zero_network(config);
    const double scale = config.init.scale;
    if (scale == 0.0) return net;

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](Matrix& m, double std) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = std * normal(rng);
    };
    auto rescale = [](Matrix& m, double target) {
        const double n = m.norm();
        if (n > 0.0) m *= target / n;
    };

    const bool exact = config.init.kind == InitKind::NormExact;
    const double post_std = scale * config.init.post_gain;
    for (auto* stack : {&net.pre_A, &net.pre_B}) {
        for (auto& w : *stack) {
            fill(w, exact ? 1.0 : scale);
            if (exact) rescale(w, scale);
        }
    }
    for (auto& w : net.post) {
        fill(w, exact ? 1.0 : post_std);
        if (exact) rescale(w, post_std);
    }
    return net;
}

namespace {

void apply_activation(Matrix& z, Activation act) {
    if (act == Activation::Relu) z = z.cwiseMax(0.0);
}

}  // namespace

Vector forward_batch(const FusionNetwork& net, const Matrix& inputs) {
    const auto& cfg = net.config;
    if (inputs.cols() != cfg.dims_A + cfg.dims_B) {
        throw Error(ErrorKind::DimensionMismatch, "input dimension does not match dims_A + dims_B");
    }
    Matrix h_A = inputs.leftCols(cfg.dims_A).transpose();
    Matrix h_B = inputs.rightCols(cfg.dims_B).transpose();
    for (int l = 0; l + 1 < cfg.L_f; ++l) {
        h_A = net.pre_A[l] * h_A;
        h_B = net.pre_B[l] * h_B;
        apply_activation(h_A, cfg.activation);
        apply_activation(h_B, cfg.activation);
    }
    Matrix h = net.pre_A.back() * h_A + net.pre_B.back() * h_B;
    for (const auto& w : net.post) {
        apply_activation(h, cfg.activation);
        h = w * h;
    }
    return h.row(0).transpose();
}

double forward(const FusionNetwork& net, const Vector& x) {
    const auto& cfg = net.config;
    if (x.size() != cfg.dims_A + cfg.dims_B) {
        throw Error(ErrorKind::DimensionMismatch, "input dimension does not match dims_A + dims_B");
    }
    return forward_batch(net, x.transpose())(0);
}

TotalMaps total_maps(const FusionNetwork& net) {
    if (net.config.activation != Activation::Linear) {
        throw Error(ErrorKind::NotLinear, "total map is undefined for a ReLU network");
    }
    Matrix p_A = net.pre_A.front();
    Matrix p_B = net.pre_B.front();
    for (std::size_t l = 1; l < net.pre_A.size(); ++l) {
        p_A = net.pre_A[l] * p_A;
        p_B = net.pre_B[l] * p_B;
    }
    for (const auto& w : net.post) {
        p_A = w * p_A;
        p_B = w * p_B;
    }
    return TotalMaps{p_A.row(0), p_B.row(0)};
}

LayerNorms layer_norms(const FusionNetwork& net) {
    LayerNorms out;
    auto mean_norm = [](const std::vector<Matrix>& stack) {
        double s = 0.0;
        for (const auto& w : stack) s += w.norm();
        return stack.empty() ? 0.0 : s / static_cast<double>(stack.size());
    };
    out.u_A = mean_norm(net.pre_A);
    out.u_B = mean_norm(net.pre_B);
    out.u = net.post.empty() ? std::hypot(out.u_A, out.u_B) : mean_norm(net.post);
    auto spread = [&](const std::vector<Matrix>& stack, double mean) {
        for (const auto& w : stack) out.max_spread = std::max(out.max_spread, std::abs(w.norm() - mean));
    };
    spread(net.pre_A, out.u_A);
    spread(net.pre_B, out.u_B);
    spread(net.post, out.u);
    return out;
}

}  // namespace unibias
