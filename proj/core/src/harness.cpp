#include "unibias/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "unibias/errors.hpp"

namespace unibias {

DatasetSpec ScalarData::spec(LabelMode mode) const {
    return DatasetSpec::scalar(sigma_A, sigma_B, rho, w_A, w_B, noise_std, mode);
}

double theory_u0(const FusionConfig& config) {
    if (config.init.kind == InitKind::NormExact) return config.init.scale;
    const double fan = static_cast<double>(layer_out_dim(config, 1)) * config.dims_A;
    return config.init.scale * std::sqrt(fan);
}

void set_theory_u0(FusionConfig& config, double u0) {
    if (config.init.kind == InitKind::NormExact) {
        config.init.scale = u0;
        return;
    }
    const double fan = static_cast<double>(layer_out_dim(config, 1)) * config.dims_A;
    config.init.scale = u0 / std::sqrt(fan);
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Rho: return "rho";
        case SweepAxis::VarianceRatio: return "variance_ratio";
        case SweepAxis::InitScale: return "init_scale";
        case SweepAxis::FusionDepth: return "fusion_depth";
    }
    return "rho";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "rho") return SweepAxis::Rho;
    if (name == "variance_ratio") return SweepAxis::VarianceRatio;
    if (name == "init_scale") return SweepAxis::InitScale;
    if (name == "fusion_depth") return SweepAxis::FusionDepth;
    throw ValidationError("sweep.axis", "unknown axis '" + name + "'");
}

void SweepSpec::validate() const {
    if (grid.empty()) throw ValidationError("sweep.grid", "grid must not be empty");
    if (seeds.empty()) throw ValidationError("sweep.seeds", "at least one seed is required");
    network.validate();
    train.validate();
    if (samples < 1) throw ValidationError("sweep.samples", "must be at least 1");
    for (double v : grid) {
        switch (axis) {
            case SweepAxis::Rho:
                if (!(v > -1.0 && v < 1.0)) throw ValidationError("sweep.grid", "rho must lie in (-1, 1)");
                break;
            case SweepAxis::VarianceRatio:
            case SweepAxis::InitScale:
                if (!(v > 0.0)) throw ValidationError("sweep.grid", "values must be positive");
                break;
            case SweepAxis::FusionDepth:
                if (v != std::floor(v) || v < 1 || v > network.L) {
                    throw ValidationError("sweep.grid", "fusion depths must be integers in [1, L]");
                }
                break;
        }
    }
}

namespace {

double first_component_or_norm(const RowVector& v) { return v.size() == 1 ? v(0) : v.norm(); }

bool needs_samples(const FusionConfig& net, const TrainConfig& train) {
    return train.drive == Drive::Samples || net.activation != Activation::Linear ||
           train.loss_kind != LossKind::Mse;
}

}  // namespace

SweepRow run_sweep_row(const SweepSpec& spec, double axis_value, std::uint64_t seed) {
    SweepRow row;
    row.axis_value = axis_value;
    row.seed = seed;
    ScalarData data = spec.data;
    FusionConfig net_cfg = spec.network;
    net_cfg.dims_A = 1;
    net_cfg.dims_B = 1;
    net_cfg.seed = seed;
    switch (spec.axis) {
        case SweepAxis::Rho: data.rho = axis_value; break;
        case SweepAxis::VarianceRatio: data.sigma_A = axis_value * data.sigma_B; break;
        case SweepAxis::InitScale: set_theory_u0(net_cfg, axis_value); break;
        case SweepAxis::FusionDepth: net_cfg.L_f = static_cast<int>(axis_value); break;
    }
    try {
        const CorrelationStats analytic = build_correlations(data.spec());
        const double u0 = theory_u0(net_cfg);
        const TheoryPrediction pred =
            predict(analytic, DepthSpec::uniform(net_cfg.L, net_cfg.L_f), u0, 1.0 / spec.train.eta);
        row.predicted_ratio = pred.ratio;
        row.misattribution_pred = first_component_or_norm(pred.misattribution);

        const bool sampled = needs_samples(net_cfg, spec.train);
        const LabelMode mode = spec.train.loss_kind == LossKind::Logistic ? LabelMode::Sign : LabelMode::Regression;
        std::optional<SampleSet> samples;
        CorrelationStats drive_stats = analytic;
        if (sampled) {
            samples = sample_dataset(data.spec(mode), spec.samples, seed + 7919);
            drive_stats = estimate_correlations(*samples);
        }
        const PhaseTargets targets = phase_targets(drive_stats);
        const auto observer = [&](const TrajectorySample& s) {
            return s.norm_wtot_A >= 0.5 * targets.target_A && s.norm_wtot_B >= 0.5 * targets.target_B;
        };

        FusionNetwork net = init_network(net_cfg);
        TrainConfig train_cfg = spec.train;
        train_cfg.drive = sampled ? Drive::Samples : Drive::Correlation;
        const Trajectory traj = sampled ? train(net, *samples, train_cfg, nullptr, observer)
                                        : train(net, drive_stats, train_cfg, nullptr, observer);

        const PhaseTimes phases = detect_phase_times(traj, drive_stats);
        row.t_first = phases.t_first;
        row.t_second = phases.t_second;
        if (phases.t_second && phases.t_first > 0.0) {
            row.simulated_ratio = *phases.t_second / phases.t_first;
        } else if (!phases.t_second) {
            row.simulated_divergent = true;
            row.status = "NoCrossing";
        }

        // Plateau read-out: the first modality's map when the second first
        // passes 5% of its target.
        const bool a_first = phases.first_modality == Modality::A;
        const double second_target = a_first ? phases.target_B : phases.target_A;
        const RowVector global = drive_stats.sigma_yx() * pseudo_inverse(drive_stats.sigma());
        for (const auto& s : traj.samples) {
            const double second_norm = a_first ? s.norm_wtot_B : s.norm_wtot_A;
            if (second_norm >= 0.05 * second_target) {
                const RowVector dev = a_first ? RowVector(s.w_tot_A - global.head(drive_stats.dims_A()))
                                              : RowVector(s.w_tot_B - global.tail(drive_stats.dims_B()));
                row.misattribution_sim = first_component_or_norm(dev);
                break;
            }
        }
    } catch (const Error& e) {
        row.status = std::string(to_string(e.kind()));
    }
    return row;
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
    spec.validate();
    std::vector<SweepRow> rows;
    rows.reserve(spec.grid.size() * spec.seeds.size());
    for (double v : spec.grid)
        for (auto seed : spec.seeds) rows.push_back(run_sweep_row(spec, v, seed));
    return rows;
}

std::vector<SweepPoint> summarize(const std::vector<SweepRow>& rows) {
    std::vector<SweepPoint> points;
    std::vector<std::vector<double>> ratios;
    for (const auto& r : rows) {
        auto it = std::find_if(points.begin(), points.end(),
                               [&](const SweepPoint& p) { return p.axis_value == r.axis_value; });
        if (it == points.end()) {
            SweepPoint p;
            p.axis_value = r.axis_value;
            p.predicted_ratio = r.predicted_ratio;
            p.misattribution_pred = r.misattribution_pred;
            points.push_back(p);
            ratios.emplace_back();
            it = points.end() - 1;
        }
        const auto idx = static_cast<std::size_t>(it - points.begin());
        if (r.simulated_ratio) ratios[idx].push_back(*r.simulated_ratio);
        if (r.misattribution_sim) {
            it->mean_misattribution += *r.misattribution_sim;
            ++it->misattribution_count;
        }
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto& p = points[i];
        const auto& xs = ratios[i];
        p.count = static_cast<int>(xs.size());
        if (p.misattribution_count) p.mean_misattribution /= p.misattribution_count;
        if (xs.empty()) {
            p.mean_ratio = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        double sum = 0.0;
        for (double x : xs) sum += x;
        p.mean_ratio = sum / static_cast<double>(xs.size());
        double sq = 0.0;
        for (double x : xs) sq += (x - p.mean_ratio) * (x - p.mean_ratio);
        p.std_ratio = xs.size() > 1 ? std::sqrt(sq / static_cast<double>(xs.size() - 1)) : 0.0;
    }
    return points;
}

namespace {

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

}  // namespace

CsvTable sweep_table(const SweepSpec& spec, const std::vector<SweepRow>& rows) {
    CsvTable t;
    t.metadata = describe(spec);
    t.header = {"axis",     "axis_value", "seed",      "status",   "simulated_ratio", "predicted_ratio",
                "t_first",  "t_second",   "misattribution_sim", "misattribution_pred"};
    for (const auto& r : rows) {
        std::string sim = opt_real(r.simulated_ratio);
        if (r.simulated_divergent) sim = "inf";
        t.rows.push_back({to_string(spec.axis), format_real(r.axis_value), std::to_string(r.seed), r.status,
                          sim, r.predicted_ratio.to_string(), opt_real(r.t_first), opt_real(r.t_second),
                          opt_real(r.misattribution_sim), format_real(r.misattribution_pred)});
    }
    return t;
}

GenExpSpec::GenExpSpec() {
    fusion.L = 2;
    fusion.L_f = 2;
    fusion.width = 100;
    fusion.init.kind = InitKind::Gaussian;
    fusion.init.scale = 3.1622776601683795e-05;
    fusion.init.post_gain = 1.0;
    train.max_steps = 6000;
    train.record_stride = 1;
}

void GenExpSpec::validate() const {
    if (dims_A < 1) throw ValidationError("genexp.dims_A", "must be a positive integer");
    if (dims_B < 1) throw ValidationError("genexp.dims_B", "must be a positive integer");
    if (!(var_A > 0.0)) throw ValidationError("genexp.var_A", "must be positive");
    if (!(var_B > 0.0)) throw ValidationError("genexp.var_B", "must be positive");
    if (!(noise_std >= 0.0)) throw ValidationError("genexp.noise_std", "must be non-negative");
    if (P_train < 1) throw ValidationError("genexp.P_train", "must be at least 1");
    FusionConfig f = fusion;
    f.dims_A = dims_A;
    f.dims_B = dims_B;
    f.validate();
    if (f.activation != Activation::Linear) throw ValidationError("network.activation", "genexp uses linear networks");
    train.validate();
}

namespace {

double min_gen_error(const Trajectory& traj) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : traj.samples)
        if (s.gen_error) best = std::min(best, *s.gen_error);
    return best;
}

}  // namespace

GenExpResult run_generalization(const GenExpSpec& spec) {
    spec.validate();
    const DatasetSpec data =
        DatasetSpec::isotropic(spec.dims_A, spec.dims_B, spec.var_A, spec.var_B, spec.w_star, spec.w_star, spec.noise_std);
    const CorrelationStats population = build_correlations(data);
    const SampleSet samples = sample_dataset(data, spec.P_train, spec.seed);
    const CorrelationStats empirical = empirical_moments(samples);

    FusionConfig cfg = spec.fusion;
    cfg.dims_A = spec.dims_A;
    cfg.dims_B = spec.dims_B;
    cfg.seed = spec.seed;
    TrainConfig train_cfg = spec.train;
    train_cfg.drive = Drive::Correlation;

    double running_min = std::numeric_limits<double>::infinity();
    StopObserver observer;
    if (spec.early_stop) {
        observer = [&running_min](const TrajectorySample& s) {
            if (!s.gen_error) return false;
            running_min = std::min(running_min, *s.gen_error);
            return *s.gen_error > 1.1 * running_min;
        };
    }

    GenExpResult res;
    FusionNetwork net = init_network(cfg);
    res.trajectory = train(net, empirical, train_cfg, &population, observer);
    const auto& xs = res.trajectory.samples;

    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (*xs[i].gen_error < *xs[best].gen_error) best = i;
    res.t_opt_stop = xs[best].time;
    res.gen_at_opt = *xs[best].gen_error;
    res.final_gen_error = *xs.back().gen_error;

    try {
        const PhaseTimes phases = detect_phase_times(res.trajectory, empirical);
        res.t_1 = phases.t_first;
        res.t_2 = phases.t_second;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoCrossing) throw;
    }

    // The weaker modality by population ||Sigma_yx|| is the one learned second.
    const bool a_stronger = population.sigma_yxA.norm() >= population.sigma_yxB.norm();
    const RowVector global = population.sigma_yx() * pseudo_inverse(population.sigma());
    const double second_global = a_stronger ? global.tail(spec.dims_B).norm() : global.head(spec.dims_A).norm();
    const double second_at_opt = a_stronger ? xs[best].norm_wtot_B : xs[best].norm_wtot_A;
    res.unimodal_at_opt = second_at_opt < 0.1 * second_global;

    FusionConfig uni_cfg = cfg;
    uni_cfg.L = 2;
    uni_cfg.L_f = 2;
    FusionNetwork uni = init_network(uni_cfg);
    auto& silent = a_stronger ? uni.pre_B : uni.pre_A;
    for (auto& w : silent) w.setZero();
    TrainConfig uni_train = train_cfg;
    uni_train.stop_loss = 0.0;
    res.unimodal_baseline = min_gen_error(train(uni, empirical, uni_train, &population));
    return res;
}

CsvTable generalization_table(const GenExpSpec& spec, const GenExpResult& result) {
    std::vector<std::string> meta = describe(spec);
    meta.push_back("t_opt_stop: " + format_real(result.t_opt_stop));
    meta.push_back("gen_at_opt: " + format_real(result.gen_at_opt));
    meta.push_back("t_1: " + opt_real(result.t_1));
    meta.push_back("t_2: " + opt_real(result.t_2));
    meta.push_back(std::string("unimodal_at_opt: ") + (result.unimodal_at_opt ? "true" : "false"));
    meta.push_back("unimodal_baseline (two-layer net on the stronger modality alone): " +
                   format_real(result.unimodal_baseline));
    return trajectory_table(result.trajectory, false, std::move(meta));
}

void XorSpec::validate() const {
    if (width < 1) throw ValidationError("xor.width", "width must be a positive integer");
    if (!(sigma_A > 0.0)) throw ValidationError("xor.sigma_A", "must be positive");
    if (samples < 4) throw ValidationError("xor.samples", "must be at least 4");
    if (!(init_std >= 0.0)) throw ValidationError("xor.init_std", "must be non-negative");
    if (!(eta > 0.0)) throw ValidationError("xor.eta", "must be positive");
    if (max_steps < 0) throw ValidationError("xor.max_steps", "must be non-negative");
    if (record_stride < 1) throw ValidationError("xor.record_stride", "must be at least 1");
    if (!(stop_loss >= 0.0)) throw ValidationError("xor.stop_loss", "must be non-negative");
}

SampleSet xor_samples(double sigma_A, long P, std::uint64_t seed) {
    static constexpr double grid[4][2] = {{1, 1}, {1, -1}, {-1, 1}, {-1, -1}};
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    SampleSet s;
    s.dims_A = 1;
    s.dims_B = 2;
    s.seed = seed;
    s.inputs.resize(P, 3);
    s.targets.resize(P);
    for (long mu = 0; mu < P; ++mu) {
        const auto& b = grid[mu % 4];
        const double x_A = sigma_A * normal(rng);
        s.inputs.row(mu) << x_A, b[0], b[1];
        s.targets(mu) = x_A + (b[0] != b[1] ? 1.0 : -1.0);
    }
    return s;
}

XorResult run_xor_demo(const XorSpec& spec) {
    spec.validate();
    FusionConfig cfg;
    cfg.L = 2;
    cfg.L_f = spec.fusion == FusionKind::Early ? 1 : 2;
    cfg.width = spec.width;
    cfg.dims_A = 1;
    cfg.dims_B = 2;
    cfg.activation = Activation::Relu;
    cfg.init.kind = InitKind::Gaussian;
    cfg.init.scale = spec.init_std;
    cfg.init.post_gain = 1.0;
    cfg.seed = spec.seed;

    const SampleSet samples = xor_samples(spec.sigma_A, spec.samples, spec.seed + 104729);
    TrainConfig tc;
    tc.eta = spec.eta;
    tc.max_steps = spec.max_steps;
    tc.drive = Drive::Samples;
    tc.record_stride = spec.record_stride;
    tc.stop_loss = spec.stop_loss;

    XorResult res;
    FusionNetwork net = init_network(cfg);
    res.trajectory = train(net, samples, tc);
    res.final_loss = res.trajectory.back().loss;
    res.first_layer_A = net.pre_A.front();
    res.first_layer_B = net.pre_B.front();
    return res;
}

namespace {

std::string kind_name(InitKind k) { return k == InitKind::Gaussian ? "gaussian" : "norm_exact"; }
std::string act_name(Activation a) { return a == Activation::Relu ? "relu" : "linear"; }
std::string loss_name(LossKind l) { return l == LossKind::Logistic ? "logistic" : "mse"; }

void describe_network(std::vector<std::string>& out, const FusionConfig& n) {
    out.push_back("network.L: " + std::to_string(n.L));
    out.push_back("network.L_f: " + std::to_string(n.L_f));
    out.push_back("network.width: " + std::to_string(n.width));
    out.push_back("network.activation: " + act_name(n.activation));
    out.push_back("network.init: " + kind_name(n.init.kind));
    out.push_back("network.init_scale: " + format_real(n.init.scale));
    out.push_back("network.post_gain: " + format_real(n.init.post_gain));
}

void describe_train(std::vector<std::string>& out, const TrainConfig& t) {
    out.push_back("training.eta: " + format_real(t.eta));
    out.push_back("training.max_steps: " + std::to_string(t.max_steps));
    out.push_back("training.loss: " + loss_name(t.loss_kind));
    out.push_back("training.record_stride: " + std::to_string(t.record_stride));
    out.push_back("training.stop_loss: " + format_real(t.stop_loss));
}

}  // namespace

std::vector<std::string> describe(const FusionConfig& network, const TrainConfig& train) {
    std::vector<std::string> out = {"artifact_version: " + std::string(kArtifactVersion)};
    describe_network(out, network);
    out.push_back("network.seed: " + std::to_string(network.seed));
    describe_train(out, train);
    return out;
}

std::vector<std::string> describe(const SweepSpec& spec) {
    std::vector<std::string> out = {"artifact_version: " + std::string(kArtifactVersion), "experiment: sweep",
                                    "sweep.axis: " + to_string(spec.axis)};
    std::ostringstream grid, seeds;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) grid << (i ? " " : "") << format_real(spec.grid[i]);
    for (std::size_t i = 0; i < spec.seeds.size(); ++i) seeds << (i ? " " : "") << spec.seeds[i];
    out.push_back("sweep.grid: " + grid.str());
    out.push_back("sweep.seeds: " + seeds.str());
    out.push_back("sweep.samples: " + std::to_string(spec.samples));
    out.push_back("dataset.sigma_A: " + format_real(spec.data.sigma_A));
    out.push_back("dataset.sigma_B: " + format_real(spec.data.sigma_B));
    out.push_back("dataset.rho: " + format_real(spec.data.rho));
    out.push_back("dataset.w_A: " + format_real(spec.data.w_A));
    out.push_back("dataset.w_B: " + format_real(spec.data.w_B));
    out.push_back("dataset.noise_std: " + format_real(spec.data.noise_std));
    describe_network(out, spec.network);
    describe_train(out, spec.train);
    return out;
}

std::vector<std::string> describe(const GenExpSpec& spec) {
    std::vector<std::string> out = {"artifact_version: " + std::string(kArtifactVersion), "experiment: genexp"};
    out.push_back("genexp.dims: " + std::to_string(spec.dims_A) + "+" + std::to_string(spec.dims_B));
    out.push_back("genexp.var_A: " + format_real(spec.var_A));
    out.push_back("genexp.var_B: " + format_real(spec.var_B));
    out.push_back("genexp.w_star: " + format_real(spec.w_star));
    out.push_back("genexp.noise_std: " + format_real(spec.noise_std));
    out.push_back("genexp.P_train: " + std::to_string(spec.P_train));
    out.push_back("genexp.seed: " + std::to_string(spec.seed));
    out.push_back(std::string("genexp.early_stop: ") + (spec.early_stop ? "true" : "false"));
    describe_network(out, spec.fusion);
    describe_train(out, spec.train);
    return out;
}

std::vector<std::string> describe(const XorSpec& spec) {
    return {"artifact_version: " + std::string(kArtifactVersion),
            "experiment: xor",
            "xor.sigma_A: " + format_real(spec.sigma_A),
            std::string("xor.fusion: ") + (spec.fusion == FusionKind::Early ? "early" : "late"),
            "xor.seed: " + std::to_string(spec.seed),
            "xor.width: " + std::to_string(spec.width),
            "xor.samples: " + std::to_string(spec.samples),
            "xor.init_std: " + format_real(spec.init_std),
            "xor.eta: " + format_real(spec.eta),
            "xor.max_steps: " + std::to_string(spec.max_steps)};
}

}  // namespace unibias
