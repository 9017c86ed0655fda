#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "unibias/csv.hpp"
#include "unibias/dynamics.hpp"
#include "unibias/network.hpp"
#include "unibias/stats.hpp"
#include "unibias/theory.hpp"

namespace unibias {

// Two scalar modalities with Var = sigma^2 and correlation rho.
struct ScalarData {
    double sigma_A = 1.0;
    double sigma_B = 0.5;
    double rho = 0.0;
    double w_A = 1.0;
    double w_B = 1.0;
    double noise_std = 0.0;

    DatasetSpec spec(LabelMode mode = LabelMode::Regression) const;
};

// u0 entering the closed forms: the Frobenius norm of the first pre-fusion
// layer (exact under NormExact, expected under Gaussian).
double theory_u0(const FusionConfig& config);
// Sets the init scale so that theory_u0(config) == u0.
void set_theory_u0(FusionConfig& config, double u0);

enum class SweepAxis { Rho, VarianceRatio, InitScale, FusionDepth };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepSpec {
    SweepAxis axis = SweepAxis::Rho;
    std::vector<double> grid;
    ScalarData data;
    FusionConfig network;
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    // Sample count for the samples drive (ReLU or logistic runs).
    long samples = 8192;

    void validate() const;
};

struct SweepRow {
    double axis_value = 0.0;
    std::uint64_t seed = 0;
    // "ok", or the error kind that stopped this row.
    std::string status = "ok";
    std::optional<double> simulated_ratio;  // absent when the second crossing is missing
    bool simulated_divergent = false;       // second modality never crossed
    TimeRatio predicted_ratio;
    std::optional<double> t_first;
    std::optional<double> t_second;
    std::optional<double> misattribution_sim;
    double misattribution_pred = 0.0;
};

struct SweepPoint {
    double axis_value = 0.0;
    double mean_ratio = 0.0;
    double std_ratio = 0.0;
    int count = 0;
    TimeRatio predicted_ratio;
    double mean_misattribution = 0.0;
    double misattribution_pred = 0.0;
    int misattribution_count = 0;
};

// Every grid point x seed, in grid-major order. Per-row failures are
// recorded in the row status and never abort the sweep.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

// Mean and sample std over seeds for each grid value, in grid order.
std::vector<SweepPoint> summarize(const std::vector<SweepRow>& rows);

// One run of the sweep machinery for a single configuration.
SweepRow run_sweep_row(const SweepSpec& spec, double axis_value, std::uint64_t seed);

CsvTable sweep_table(const SweepSpec& spec, const std::vector<SweepRow>& rows);

struct GenExpSpec {
    int dims_A = 50;
    int dims_B = 50;
    double var_A = 1.0;
    double var_B = 3.0;
    double w_star = 0.1;
    double noise_std = 0.5;
    long P_train = 700;
    FusionConfig fusion;
    TrainConfig train;
    // Stop once gen_error exceeds 1.1 times its running minimum.
    bool early_stop = false;
    std::uint64_t seed = 0;

    GenExpSpec();
    void validate() const;
};

struct GenExpResult {
    Trajectory trajectory;
    double t_opt_stop = 0.0;
    double gen_at_opt = 0.0;
    std::optional<double> t_1;
    std::optional<double> t_2;
    bool unimodal_at_opt = false;
    // Best population risk of a two-layer linear network trained on the
    // stronger modality alone, from the same samples.
    double unimodal_baseline = 0.0;
    double final_gen_error = 0.0;
};

GenExpResult run_generalization(const GenExpSpec& spec);

CsvTable generalization_table(const GenExpSpec& spec, const GenExpResult& result);

enum class FusionKind { Early, Late };

struct XorSpec {
    double sigma_A = 1.0;  // standard deviation of the linear modality
    FusionKind fusion = FusionKind::Late;
    std::uint64_t seed = 0;
    int width = 100;
    long samples = 512;
    double init_std = 3.1622776601683795e-05;
    double eta = 0.04;
    long max_steps = 8000;
    long record_stride = 10;
    // Training halts once the loss reaches this value.
    double stop_loss = 0.0;

    void validate() const;
};

struct XorResult {
    double final_loss = 0.0;
    Matrix first_layer_A;  // width x 1 (early fusion: column of the shared layer)
    Matrix first_layer_B;  // width x 2
    Trajectory trajectory;
};

// Samples for y = x_A + XOR(x_B): x_B cycles through {+-1}^2 and XOR is +1
// when the two entries differ, -1 otherwise.
SampleSet xor_samples(double sigma_A, long P, std::uint64_t seed);

XorResult run_xor_demo(const XorSpec& spec);

// Echo of the run for a sidecar metadata file (one "key: value" per line).
std::vector<std::string> describe(const SweepSpec& spec);
std::vector<std::string> describe(const GenExpSpec& spec);
std::vector<std::string> describe(const XorSpec& spec);
std::vector<std::string> describe(const FusionConfig& network, const TrainConfig& train);

inline constexpr const char* kArtifactVersion = "0.1.0";

}  // namespace unibias
