#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "unibias/errors.hpp"
#include "unibias/network.hpp"

using namespace unibias;

namespace {

FusionConfig config(int L, int L_f, int dA = 2, int dB = 3, int width = 7) {
    FusionConfig c;
    c.L = L;
    c.L_f = L_f;
    c.dims_A = dA;
    c.dims_B = dB;
    c.width = width;
    c.init.kind = InitKind::Gaussian;
    c.init.scale = 0.4;
    c.seed = 17;
    return c;
}

Vector random_input(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Vector x(dim);
    for (int i = 0; i < dim; ++i) x(i) = n(rng);
    return x;
}

}  // namespace

TEST(FusionConfig, ValidationNamesKey) {
    FusionConfig c = config(2, 3);
    try {
        c.validate();
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.key(), "network.L_f");
    }
    c = config(2, 2);
    c.width = 0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(InitNetwork, Shapes) {
    for (int L = 1; L <= 4; ++L) {
        for (int lf = 1; lf <= L; ++lf) {
            const auto net = init_network(config(L, lf));
            ASSERT_EQ(static_cast<int>(net.pre_A.size()), lf);
            ASSERT_EQ(static_cast<int>(net.post.size()), L - lf);
            EXPECT_EQ(net.pre_A[0].cols(), 2);
            EXPECT_EQ(net.pre_B[0].cols(), 3);
            const Matrix& last = net.post.empty() ? net.pre_A.back() : net.post.back();
            EXPECT_EQ(last.rows(), 1);
        }
    }
}

TEST(InitNetwork, NormExactLayerNorms) {
    FusionConfig c = config(4, 2);
    c.init.kind = InitKind::NormExact;
    c.init.scale = 1e-3;
    const auto net = init_network(c);
    for (const auto& w : net.pre_A) EXPECT_NEAR(w.norm(), 1e-3, 1e-12);
    for (const auto& w : net.pre_B) EXPECT_NEAR(w.norm(), 1e-3, 1e-12);
    for (const auto& w : net.post) EXPECT_NEAR(w.norm(), std::sqrt(2.0) * 1e-3, 1e-12);
    const auto n = layer_norms(net);
    EXPECT_NEAR(n.u_A, 1e-3, 1e-15);
    EXPECT_NEAR(n.u_B, 1e-3, 1e-15);
    EXPECT_NEAR(n.u, std::sqrt(2.0) * 1e-3, 1e-15);
    EXPECT_LE(std::abs(n.u * n.u - (n.u_A * n.u_A + n.u_B * n.u_B)), 1e-12);
}

TEST(InitNetwork, ZeroStdIsZeroNetwork) {
    FusionConfig c = config(3, 2);
    c.init.scale = 0.0;
    const auto net = init_network(c);
    for (const auto& w : net.pre_A) EXPECT_EQ(w.norm(), 0.0);
    for (const auto& w : net.post) EXPECT_EQ(w.norm(), 0.0);
}

TEST(InitNetwork, DeterministicPerSeed) {
    const auto a = init_network(config(3, 2));
    const auto b = init_network(config(3, 2));
    EXPECT_EQ(a.pre_A[0], b.pre_A[0]);
    FusionConfig c = config(3, 2);
    c.seed = 18;
    EXPECT_NE(init_network(c).pre_A[0], a.pre_A[0]);
}

TEST(InitNetwork, GaussianStd) {
    FusionConfig c = config(2, 2, 1, 1, 20000);
    c.init.scale = 0.1;
    const auto net = init_network(c);
    const double sd = std::sqrt(net.pre_A[0].squaredNorm() / net.pre_A[0].size());
    EXPECT_NEAR(sd, 0.1, 0.003);
}

TEST(Forward, ZeroNetwork) {
    const auto net = zero_network(config(3, 2));
    std::mt19937_64 rng(1);
    EXPECT_EQ(forward(net, random_input(5, rng)), 0.0);
}

TEST(Forward, ScalarHandComposition) {
    FusionConfig c = config(2, 2, 1, 1, 1);
    auto net = zero_network(c);
    const double a1 = 0.3, a2 = -1.7, b1 = 2.1, b2 = 0.4;
    net.pre_A[0](0, 0) = a1;
    net.pre_A[1](0, 0) = a2;
    net.pre_B[0](0, 0) = b1;
    net.pre_B[1](0, 0) = b2;
    const Vector x{{1.3, -0.6}};
    EXPECT_DOUBLE_EQ(forward(net, x), a2 * a1 * 1.3 + b2 * b1 * -0.6);
}

TEST(Forward, DimensionMismatch) {
    const auto net = init_network(config(2, 2));
    try {
        forward(net, Vector::Zero(4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
    }
}

TEST(Forward, MatchesTotalMaps) {
    std::mt19937_64 rng(3);
    for (int lf = 1; lf <= 4; ++lf) {
        const auto net = init_network(config(4, lf));
        const RowVector w = total_maps(net).concatenated();
        for (int probe = 0; probe < 100; ++probe) {
            const Vector x = random_input(5, rng);
            EXPECT_NEAR(forward(net, x), w.dot(x), 1e-10);
        }
    }
}

TEST(Forward, BatchMatchesSingle) {
    FusionConfig c = config(3, 2);
    c.activation = Activation::Relu;
    const auto net = init_network(c);
    std::mt19937_64 rng(4);
    Matrix X(20, 5);
    for (int i = 0; i < 20; ++i) X.row(i) = random_input(5, rng).transpose();
    const Vector y = forward_batch(net, X);
    for (int i = 0; i < 20; ++i) EXPECT_NEAR(y(i), forward(net, X.row(i).transpose()), 1e-14);
}

TEST(Forward, ReluHiddenOnly) {
    // One hidden unit feeding a negative output weight: the output itself is
    // not rectified, the hidden unit is.
    FusionConfig c = config(2, 2, 1, 1, 1);
    c.activation = Activation::Relu;
    auto net = zero_network(c);
    net.pre_A[0](0, 0) = 1.0;
    net.pre_A[1](0, 0) = -2.0;
    EXPECT_DOUBLE_EQ(forward(net, Vector{{1.5, 0.0}}), -3.0);
    EXPECT_DOUBLE_EQ(forward(net, Vector{{-1.5, 0.0}}), 0.0);
}

TEST(TotalMaps, IdentityChains) {
    FusionConfig c = config(3, 3, 1, 1, 1);
    auto net = zero_network(c);
    net.pre_A[0](0, 0) = 0.7;
    net.pre_B[0](0, 0) = -0.2;
    for (int l = 1; l < 3; ++l) {
        net.pre_A[l](0, 0) = 1.0;
        net.pre_B[l](0, 0) = 1.0;
    }
    const auto m = total_maps(net);
    EXPECT_DOUBLE_EQ(m.w_tot_A(0), 0.7);
    EXPECT_DOUBLE_EQ(m.w_tot_B(0), -0.2);
}

TEST(TotalMaps, ProbeReconstruction) {
    const auto net = init_network(config(4, 3));
    const RowVector w = total_maps(net).concatenated();
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(forward(net, Vector::Unit(5, i)), w(i), 1e-10);
    }
}

TEST(TotalMaps, ReluIsNotLinear) {
    FusionConfig c = config(2, 2);
    c.activation = Activation::Relu;
    try {
        total_maps(init_network(c));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotLinear);
    }
}

TEST(TotalMaps, EarlyFusionEqualsDenseChain) {
    const auto net = init_network(config(3, 1));
    Matrix first(net.pre_A[0].rows(), 5);
    first << net.pre_A[0], net.pre_B[0];
    Matrix chain = net.post[1] * net.post[0] * first;
    EXPECT_LT((total_maps(net).concatenated() - RowVector(chain.row(0))).norm(), 1e-12);
}

TEST(LayerNorms, ZeroNetwork) {
    const auto n = layer_norms(zero_network(config(3, 2)));
    EXPECT_EQ(n.u_A, 0.0);
    EXPECT_EQ(n.u_B, 0.0);
    EXPECT_EQ(n.u, 0.0);
}

TEST(Property, Superposition) {
    std::mt19937_64 rng(8);
    for (int lf = 1; lf <= 3; ++lf) {
        const auto net = init_network(config(3, lf));
        for (int probe = 0; probe < 20; ++probe) {
            const Vector x = random_input(5, rng);
            const Vector z = random_input(5, rng);
            const double a = 1.7, b = -0.4;
            EXPECT_NEAR(forward(net, a * x + b * z), a * forward(net, x) + b * forward(net, z), 1e-10);
        }
    }
}

TEST(LayerOutDim, Chain) {
    const FusionConfig c = config(3, 2);
    EXPECT_EQ(layer_out_dim(c, 1), 7);
    EXPECT_EQ(layer_out_dim(c, 3), 1);
}
