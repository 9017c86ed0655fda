#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "unibias/errors.hpp"
#include "unibias/network.hpp"
#include "unibias/stats.hpp"

namespace unibias {

enum class LossKind { Mse, Logistic };
enum class Drive { Correlation, Samples };
enum class Modality { A, B };

struct TrainConfig {
    double eta = 0.04;
    long max_steps = 10000;
    LossKind loss_kind = LossKind::Mse;
    Drive drive = Drive::Correlation;
    long record_stride = 1;
    double stop_loss = 0.0;
    bool record_first_layer = false;

    void validate() const;
};

struct ErrorCorrelations {
    RowVector e_A;
    RowVector e_B;
};

struct TrajectorySample {
    long step = 0;
    double time = 0.0;  // step * eta, in units of tau
    double loss = 0.0;
    double norm_wtot_A = 0.0;
    double norm_wtot_B = 0.0;
    RowVector w_tot_A;
    RowVector w_tot_B;
    double u_A = 0.0;
    double u_B = 0.0;
    double u = 0.0;
    std::optional<double> gen_error;
    std::optional<Matrix> first_layer_A;
    std::optional<Matrix> first_layer_B;
};

struct Trajectory {
    std::vector<TrajectorySample> samples;
    double eta = 0.04;

    bool empty() const { return samples.empty(); }
    const TrajectorySample& back() const { return samples.back(); }
};

class DivergedError : public Error {
public:
    DivergedError(const std::string& message, Trajectory partial);
    const Trajectory& partial() const noexcept { return partial_; }

private:
    Trajectory partial_;
};

struct PhaseTimes {
    Modality first_modality = Modality::A;
    double t_first = 0.0;
    std::optional<double> t_second;
    // Half-crossing level source of the first modality (its saddle norm).
    double plateau_first = 0.0;
    double target_A = 0.0;
    double target_B = 0.0;
};

struct BalanceReport {
    double stack_abs = 0.0;  // consecutive layers within a stack
    double stack_rel = 0.0;
    double mixed_abs = 0.0;  // fusion layer against the first post-fusion layer
    double mixed_rel = 0.0;
    double norm_abs = 0.0;   // |u_A^2 + u_B^2 - u^2| from mean layer norms
    double norm_rel = 0.0;

    double max_relative() const;
};

ErrorCorrelations error_correlations(const CorrelationStats& stats, const TotalMaps& maps);

double loss_from_stats(const CorrelationStats& stats, const TotalMaps& maps);

// One explicit Euler step of the correlation-driven flow. Returns the loss
// of the pre-update network.
double gd_step_correlation(FusionNetwork& net, const CorrelationStats& stats, double eta);

// One full-batch gradient step on a sample set. Returns the pre-update loss.
double gd_step_samples(FusionNetwork& net, const SampleSet& samples, double eta, LossKind loss);

double sample_loss(const FusionNetwork& net, const SampleSet& samples, LossKind loss);

// Least-squares linear read-out of the network function on `samples`;
// equals total_maps for linear networks.
TotalMaps effective_maps(const FusionNetwork& net, const SampleSet& samples);

// Called on every recorded sample; returning true ends training after it.
using StopObserver = std::function<bool(const TrajectorySample&)>;

// Trains in place. `population` enables the gen_error column.
Trajectory train(FusionNetwork& net, const CorrelationStats& stats, const TrainConfig& config,
                 const CorrelationStats* population = nullptr, const StopObserver& observer = {});
Trajectory train(FusionNetwork& net, const SampleSet& samples, const TrainConfig& config,
                 const CorrelationStats* population = nullptr, const StopObserver& observer = {});

struct PhaseTargets {
    double target_A = 0.0;
    double target_B = 0.0;
    Modality faster = Modality::A;
};

// Half-crossing targets: the faster modality (larger ||Sigma_yx||, A on a
// tie) uses its saddle norm, the other the norm of its block of the global
// solution.
PhaseTargets phase_targets(const CorrelationStats& stats);
PhaseTimes detect_phase_times(const Trajectory& traj, const CorrelationStats& stats);

// Time at which ||w_tot|| of `which` first reaches `level`, interpolated.
std::optional<double> crossing_time(const Trajectory& traj, Modality which, double level);

// Loss at the flattest recorded point between the two half-crossings (or after
// the first one when the second modality never crosses).
double plateau_loss(const Trajectory& traj, const PhaseTimes& phases);

BalanceReport check_balancing(const FusionNetwork& net);

}  // namespace unibias
