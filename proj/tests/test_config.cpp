#include <gtest/gtest.h>

#include <string>

#include "unibias/config.hpp"
#include "unibias/errors.hpp"

using namespace unibias;

namespace {

std::string error_key(const std::string& text, const std::vector<Override>& ov = {}) {
    try {
        parse_config(text, ov);
    } catch (const ValidationError& e) {
        return e.key();
    }
    return "<no error>";
}

const char* kTwoLayer = R"(schema: 1
dataset:
  sigma_A: 2
  sigma_B: 1
  rho: 0
network:
  L: 2
  L_f: 2
  width: 10
  init: norm_exact
  init_scale: 1.0e-4
training:
  eta: 0.04
  max_steps: 500
)";

}  // namespace

TEST(ParseConfig, ReadsSections) {
    const auto c = parse_config(kTwoLayer);
    EXPECT_EQ(c.schema, 1);
    EXPECT_EQ(c.scalar.sigma_A, 2.0);
    EXPECT_EQ(c.network.width, 10);
    EXPECT_EQ(c.network.init.kind, InitKind::NormExact);
    EXPECT_EQ(c.network.dims_A, 1);
    EXPECT_EQ(c.training.max_steps, 500);
    EXPECT_EQ(c.sweep.network.width, 10);
    const auto spec = c.dataset_spec();
    EXPECT_EQ(spec.sigma(0, 0), 4.0);
}

TEST(ParseConfig, DefaultsWhenSectionsMissing) {
    const auto c = parse_config("schema: 1\n");
    EXPECT_EQ(c.training.eta, TrainConfig{}.eta);
    EXPECT_EQ(c.network.L, FusionConfig{}.L);
}

TEST(ParseConfig, SchemaRequiredAndVersioned) {
    EXPECT_EQ(error_key("network:\n  L: 2\n"), "schema");
    EXPECT_EQ(error_key("schema: 2\n"), "schema");
}

TEST(ParseConfig, UnknownKeyIsNamed) {
    EXPECT_EQ(error_key("schema: 1\nnetwork:\n  depth: 3\n"), "network.depth");
    EXPECT_EQ(error_key("schema: 1\nbogus: 1\n"), "bogus");
}

TEST(ParseConfig, FusionBeyondDepthNamesLf) {
    EXPECT_EQ(error_key("schema: 1\nnetwork:\n  L: 2\n  L_f: 3\n"), "network.L_f");
}

TEST(ParseConfig, WrongTypeNamesKey) {
    EXPECT_EQ(error_key("schema: 1\ntraining:\n  eta: fast\n"), "training.eta");
    EXPECT_EQ(error_key("schema: 1\nnetwork:\n  activation: tanh\n"), "network.activation");
}

TEST(ParseConfig, OverridesApplyAfterFile) {
    const auto c = parse_config(kTwoLayer, {parse_override("network.width=33"), parse_override("dataset.rho=0.5")});
    EXPECT_EQ(c.network.width, 33);
    EXPECT_EQ(c.scalar.rho, 0.5);
    EXPECT_EQ(error_key(kTwoLayer, {parse_override("network.L_f=5")}), "network.L_f");
    EXPECT_EQ(error_key(kTwoLayer, {parse_override("network.nope=1")}), "network.nope");
}

TEST(ParseConfig, OverrideCreatesSection) {
    const auto c = parse_config("schema: 1\n", {parse_override("sweep.grid=[0.1, 0.2]")});
    EXPECT_EQ(c.sweep.grid, (std::vector<double>{0.1, 0.2}));
}

TEST(ParseOverride, Syntax) {
    const auto o = parse_override("a.b=c=d");
    EXPECT_EQ(o.first, "a.b");
    EXPECT_EQ(o.second, "c=d");
    EXPECT_THROW(parse_override("novalue"), ValidationError);
    EXPECT_THROW(parse_override("=1"), ValidationError);
}

TEST(ParseConfig, InfiniteStopLoss) {
    const auto c = parse_config("schema: 1\ntraining:\n  stop_loss: inf\n");
    EXPECT_TRUE(std::isinf(c.training.stop_loss));
}

TEST(ParseConfig, MatrixDataset) {
    const auto c = parse_config(R"(schema: 1
dataset:
  dims_A: 1
  sigma: [[4, 2], [2, 1]]
  w_star_A: [1]
  w_star_B: [1]
)");
    EXPECT_FALSE(c.scalar_dataset);
    EXPECT_EQ(c.dataset_spec().sigma(0, 1), 2.0);
    EXPECT_EQ(error_key("schema: 1\ndataset:\n  sigma: [[1, 0], [0]]\n  w_star_A: [1]\n  w_star_B: [1]\n"),
              "dataset.sigma");
}

TEST(ParseConfig, MalformedYaml) {
    EXPECT_EQ(error_key("schema: [1\n"), "<config>");
}

TEST(LoadConfig, MissingFileIsIo) {
    try {
        load_config("/nonexistent/config.yaml");
        FAIL();
    } catch (const ValidationError&) {
        FAIL() << "missing file is not a validation error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Io);
    }
}
