#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unibias/dynamics.hpp"
#include "unibias/harness.hpp"
#include "unibias/network.hpp"
#include "unibias/stats.hpp"

namespace unibias {

inline constexpr int kConfigSchema = 1;

// Parsed experiment configuration. Every section is optional in the file;
// missing keys keep the defaults below.
struct ExperimentConfig {
    int schema = kConfigSchema;
    // Scalar parameterization unless the dataset section gives `sigma`.
    bool scalar_dataset = true;
    ScalarData scalar;
    LabelMode label_mode = LabelMode::Regression;
    DatasetSpec dataset;  // filled from `scalar` when scalar_dataset
    FusionConfig network;
    TrainConfig training;
    long samples = 8192;
    SweepSpec sweep;
    GenExpSpec genexp;
    XorSpec xor_spec;
    std::optional<double> predict_u0;

    DatasetSpec dataset_spec() const;
};

using Override = std::pair<std::string, std::string>;

// Splits "key=value"; throws ValidationError on a missing '='.
Override parse_override(const std::string& text);

// Overrides are applied to the document before it is interpreted. Throws
// ValidationError naming the offending key.
ExperimentConfig parse_config(const std::string& text, const std::vector<Override>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

}  // namespace unibias
