#pragma once

#include <cstdint>
#include <vector>

#include "unibias/linalg.hpp"

namespace unibias {

enum class Activation { Linear, Relu };
enum class InitKind { Gaussian, NormExact };

struct InitSpec {
    InitKind kind = InitKind::NormExact;
    // Gaussian: entry std of pre-fusion layers. NormExact: u0, the Frobenius
    // norm of every pre-fusion layer.
    double scale = 1e-4;
    // Multiplier applied to post-fusion layers (std for Gaussian, norm for
    // NormExact). sqrt(2) keeps u_A^2 + u_B^2 = u^2 under NormExact.
    double post_gain = 1.4142135623730951;
};

struct FusionConfig {
    int L = 2;
    int L_f = 2;
    int width = 100;
    int dims_A = 1;
    int dims_B = 1;
    Activation activation = Activation::Linear;
    InitSpec init;
    std::uint64_t seed = 0;

    // Throws ValidationError naming the offending field.
    void validate() const;
};

struct FusionNetwork {
    std::vector<Matrix> pre_A;  // L_f matrices, pre_A[0] is width x dims_A
    std::vector<Matrix> pre_B;
    std::vector<Matrix> post;   // L - L_f matrices, last has one row
    FusionConfig config;
};

struct TotalMaps {
    RowVector w_tot_A;
    RowVector w_tot_B;

    RowVector concatenated() const;
};

struct LayerNorms {
    double u_A = 0.0;
    double u_B = 0.0;
    double u = 0.0;
    // Largest deviation of any single layer norm from its stack mean.
    double max_spread = 0.0;
};

FusionNetwork init_network(const FusionConfig& config);

// All-zero network with the shapes implied by `config`.
FusionNetwork zero_network(const FusionConfig& config);

double forward(const FusionNetwork& net, const Vector& x);

// Outputs for every row of `inputs` (P x (dims_A + dims_B)).
Vector forward_batch(const FusionNetwork& net, const Matrix& inputs);

TotalMaps total_maps(const FusionNetwork& net);

LayerNorms layer_norms(const FusionNetwork& net);

// Output dimension of layer l (1-based) in a stack of total depth L.
int layer_out_dim(const FusionConfig& config, int l);

}  // namespace unibias
