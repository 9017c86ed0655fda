#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "unibias/config.hpp"
#include "unibias/csv.hpp"
#include "unibias/errors.hpp"
#include "unibias/harness.hpp"
#include "unibias/linalg.hpp"
#include "unibias/theory.hpp"

namespace unibias::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config_path;
    std::string out_dir = ".";
    std::vector<std::string> overrides;
    std::optional<long> seed;
    long stats_samples = 0;
    int jobs = 1;
};

ExperimentConfig load(const Options& o) {
    std::vector<Override> ov;
    for (const auto& s : o.overrides) ov.push_back(parse_override(s));
    if (o.config_path.empty()) return parse_config("schema: 1\n", ov);
    return load_config(o.config_path, ov);
}

std::string modality_name(Modality m) { return m == Modality::A ? "A" : "B"; }

std::string join_reals(const RowVector& v) {
    std::string s;
    for (long i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_real(v(i));
    return s;
}

// Population statistics of the configured dataset. Singular input
// correlations (the collinear case) are accepted when PSD.
CorrelationStats population_stats(const DatasetSpec& spec) {
    try {
        return build_correlations(spec);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NonPositiveDefinite || !is_positive_semidefinite(spec.sigma)) throw;
        const RowVector w = spec.w_star();
        const RowVector yx = w * spec.sigma;
        const double y_sq = (yx * w.transpose())(0, 0) + spec.noise_std * spec.noise_std;
        return CorrelationStats::from_moments(spec.sigma, spec.dims_A, yx, y_sq);
    }
}

std::vector<std::string> dataset_lines(const ExperimentConfig& c) {
    std::vector<std::string> out;
    if (c.scalar_dataset) {
        out.push_back("dataset.sigma_A: " + format_real(c.scalar.sigma_A));
        out.push_back("dataset.sigma_B: " + format_real(c.scalar.sigma_B));
        out.push_back("dataset.rho: " + format_real(c.scalar.rho));
        out.push_back("dataset.w_A: " + format_real(c.scalar.w_A));
        out.push_back("dataset.w_B: " + format_real(c.scalar.w_B));
    } else {
        const DatasetSpec& d = c.dataset;
        std::ostringstream sigma;
        for (long i = 0; i < d.sigma.rows(); ++i) {
            sigma << (i ? "; " : "");
            for (long j = 0; j < d.sigma.cols(); ++j) sigma << (j ? " " : "") << format_real(d.sigma(i, j));
        }
        out.push_back("dataset.dims_A: " + std::to_string(d.dims_A));
        out.push_back("dataset.sigma: " + sigma.str());
        out.push_back("dataset.w_star_A: " + join_reals(d.w_star_A));
        out.push_back("dataset.w_star_B: " + join_reals(d.w_star_B));
    }
    out.push_back("dataset.noise_std: " + format_real(c.scalar.noise_std));
    out.push_back(std::string("dataset.label_mode: ") + (c.label_mode == LabelMode::Sign ? "sign" : "regression"));
    return out;
}

class Outputs {
public:
    Outputs(const Options& o, std::ostream& log) : dir_(o.out_dir), log_(log) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir_.string());
        invocation_.push_back("config: " + (o.config_path.empty() ? std::string("<defaults>") : o.config_path));
        for (const auto& s : o.overrides) invocation_.push_back("override: " + s);
        if (o.seed) invocation_.push_back("seed: " + std::to_string(*o.seed));
    }

    // CSV with the run description as metadata plus a sidecar with the same
    // echo. The timestamp line is the only non-reproducible content.
    void table(const std::string& stem, CsvTable t, const std::vector<std::string>& meta) {
        std::vector<std::string> lines = {timestamp_line()};
        lines.insert(lines.end(), meta.begin(), meta.end());
        lines.insert(lines.end(), t.metadata.begin(), t.metadata.end());
        t.metadata = lines;
        const fs::path csv = dir_ / (stem + ".csv");
        write_csv(t, csv);
        sidecar(stem, lines);
        log_ << "wrote " << csv.string() << "\n";
    }

private:
    void sidecar(const std::string& stem, const std::vector<std::string>& lines) {
        const fs::path p = dir_ / (stem + ".meta.txt");
        std::ofstream out(p, std::ios::binary);
        if (!out) throw Error(ErrorKind::Io, "cannot open " + p.string() + " for writing");
        for (const auto& l : lines) out << l << "\n";
        for (const auto& l : invocation_) out << l << "\n";
        if (!out.flush()) throw Error(ErrorKind::Io, "failed writing " + p.string());
    }

    fs::path dir_;
    std::ostream& log_;
    std::vector<std::string> invocation_;
};

void add_stat_rows(CsvTable& t, const std::string& source, const CorrelationStats& s) {
    const Matrix sigma = s.sigma();
    for (long i = 0; i < sigma.rows(); ++i)
        for (long j = 0; j < sigma.cols(); ++j)
            t.rows.push_back({source, "sigma", std::to_string(i), std::to_string(j), format_real(sigma(i, j))});
    const RowVector yx = s.sigma_yx();
    for (long i = 0; i < yx.size(); ++i)
        t.rows.push_back({source, "sigma_yx", std::to_string(i), "", format_real(yx(i))});
    const RowVector eff = effective_correlation_B(s);
    for (long i = 0; i < eff.size(); ++i)
        t.rows.push_back({source, "eff_corr_B", std::to_string(i), "", format_real(eff(i))});
    t.rows.push_back({source, "y_sq", "", "", format_real(s.y_sq)});
}

int run_stats(const Options& o, std::ostream& out) {
    ExperimentConfig c = load(o);
    const DatasetSpec spec = c.dataset_spec();
    const CorrelationStats s = population_stats(spec);
    CsvTable t;
    t.header = {"source", "quantity", "i", "j", "value"};
    add_stat_rows(t, "analytic", s);

    out << "sigma_yx: " << join_reals(s.sigma_yx()) << "\n";
    out << "y_sq: " << format_real(s.y_sq) << "\n";
    out << "eff_corr_B: " << join_reals(effective_correlation_B(s)) << "\n";
    const SaddleLosses l = saddle_losses(s);
    out << "loss_at_MA: " << format_real(l.loss_at_MA) << "\n";
    out << "loss_at_MB: " << format_real(l.loss_at_MB) << "\n";
    try {
        const Preference p = superficial_preference(s);
        out << "first: " << modality_name(p.first) << "\n";
        out << "superficial: " << (p.superficial ? "true" : "false") << "\n";
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::Tie) throw;
        out << "first: tie\n";
    }
    std::vector<std::string> meta = {"artifact_version: " + std::string(kArtifactVersion), "experiment: stats"};
    const auto d = dataset_lines(c);
    meta.insert(meta.end(), d.begin(), d.end());
    if (o.stats_samples > 0) {
        meta.push_back("samples: " + std::to_string(o.stats_samples));
        const std::uint64_t seed = o.seed ? static_cast<std::uint64_t>(*o.seed) : c.network.seed;
        try {
            const CorrelationStats emp = empirical_moments(sample_dataset(spec, o.stats_samples, seed));
            add_stat_rows(t, "empirical", emp);
            out << "empirical sigma_yx: " << join_reals(emp.sigma_yx()) << "\n";
        } catch (const Error& e) {
            // Singular designs cannot be sampled; keep the analytic part.
            meta.push_back("status: " + std::string(to_string(e.kind())));
            Outputs(o, out).table("stats", t, meta);
            throw;
        }
    }
    Outputs(o, out).table("stats", t, meta);
    return kOk;
}

bool needs_samples(const ExperimentConfig& c) {
    return c.training.drive == Drive::Samples || c.network.activation != Activation::Linear ||
           c.training.loss_kind != LossKind::Mse;
}

int run_simulate(const Options& o, std::ostream& out, std::ostream& err) {
    ExperimentConfig c = load(o);
    if (o.seed) c.network.seed = static_cast<std::uint64_t>(*o.seed);
    DatasetSpec spec = c.dataset_spec();
    if (c.training.loss_kind == LossKind::Logistic) spec.label_mode = LabelMode::Sign;
    const CorrelationStats population = population_stats(spec);

    std::vector<std::string> meta = describe(c.network, c.training);
    meta.insert(meta.begin() + 1, "experiment: simulate");
    const bool sampled = needs_samples(c);
    meta.push_back(std::string("training.drive: ") + (sampled ? "samples" : "correlation"));
    if (sampled) meta.push_back("training.samples: " + std::to_string(c.samples));
    const auto d = dataset_lines(c);
    meta.insert(meta.end(), d.begin(), d.end());

    Outputs outputs(o, out);
    FusionNetwork net = init_network(c.network);
    TrainConfig tc = c.training;
    tc.drive = sampled ? Drive::Samples : Drive::Correlation;
    Trajectory traj;
    CorrelationStats drive_stats = population;
    const bool regression = spec.label_mode == LabelMode::Regression;
    try {
        if (sampled) {
            const SampleSet samples = sample_dataset(spec, c.samples, c.network.seed + 7919);
            drive_stats = empirical_moments(samples);
            traj = train(net, samples, tc, regression ? &population : nullptr);
        } else {
            traj = train(net, population, tc);
        }
    } catch (const DivergedError& e) {
        meta.push_back("status: Diverged");
        outputs.table("trajectory", trajectory_table(e.partial(), true), meta);
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    meta.push_back("status: ok");
    outputs.table("trajectory", trajectory_table(traj, true), meta);

    const auto& last = traj.back();
    out << "steps: " << last.step << "\n";
    out << "final_loss: " << format_real(last.loss) << "\n";
    out << "w_tot_A: " << join_reals(last.w_tot_A) << "\n";
    out << "w_tot_B: " << join_reals(last.w_tot_B) << "\n";
    try {
        const PhaseTimes p = detect_phase_times(traj, drive_stats);
        out << "first: " << modality_name(p.first_modality) << "\n";
        out << "t_first: " << format_real(p.t_first) << "\n";
        out << "t_second: " << (p.t_second ? format_real(*p.t_second) : std::string("none")) << "\n";
        if (p.t_second && p.t_first > 0.0) out << "ratio: " << format_real(*p.t_second / p.t_first) << "\n";
    } catch (const Error& e) {
        out << "phases: " << e.what() << "\n";
    }
    return kOk;
}

int run_predict(const Options& o, std::ostream& out) {
    const ExperimentConfig c = load(o);
    const CorrelationStats s = population_stats(c.dataset_spec());
    const double u0 = c.predict_u0 ? *c.predict_u0 : theory_u0(c.network);
    const DepthSpec depth = DepthSpec::uniform(c.network.L, c.network.L_f);
    const TheoryPrediction p = predict(s, depth, u0, 1.0);

    CsvTable t;
    t.header = {"quantity", "value"};
    auto add = [&](const std::string& k, const std::string& v) {
        t.rows.push_back({k, v});
        out << k << ": " << v << "\n";
    };
    add("first", modality_name(p.first_modality));
    add("ratio", p.ratio.to_string());
    add("t_A", format_real(p.t_A));
    add("t_B", format_real(p.t_B));
    add("k", format_real(p.k));
    add("eff_corr_norm", format_real(p.eff_corr_norm));
    add("misattribution", join_reals(p.misattribution));
    if (p.integral_value) add("integral", format_real(*p.integral_value));

    std::vector<std::string> meta = {"artifact_version: " + std::string(kArtifactVersion), "experiment: predict",
                                     "network.L: " + std::to_string(depth.L),
                                     "network.L_f: " + std::to_string(depth.L_f), "u0: " + format_real(u0),
                                     "time_unit: tau"};
    const auto d = dataset_lines(c);
    meta.insert(meta.end(), d.begin(), d.end());
    Outputs(o, out).table("predict", t, meta);
    return kOk;
}

std::vector<SweepRow> parallel_rows(const SweepSpec& spec, int jobs) {
    spec.validate();
    std::vector<std::pair<double, std::uint64_t>> work;
    for (double v : spec.grid)
        for (auto seed : spec.seeds) work.emplace_back(v, seed);
    std::vector<SweepRow> rows(work.size());
    const int n = std::max(1, std::min<int>(jobs, static_cast<int>(work.size())));
    if (n == 1) return run_sweep(spec);
    std::vector<std::future<void>> tasks;
    for (int w = 0; w < n; ++w) {
        tasks.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < work.size(); i += n)
                rows[i] = run_sweep_row(spec, work[i].first, work[i].second);
        }));
    }
    for (auto& t : tasks) t.get();
    return rows;
}

int run_sweep_cmd(const Options& o, std::ostream& out) {
    ExperimentConfig c = load(o);
    SweepSpec spec = c.sweep;
    if (o.seed) spec.seeds = {static_cast<std::uint64_t>(*o.seed)};
    const auto rows = parallel_rows(spec, o.jobs);
    Outputs outputs(o, out);
    outputs.table("sweep", sweep_table(spec, rows), {});

    CsvTable summary;
    summary.header = {"axis_value", "mean_ratio", "std_ratio", "count", "predicted_ratio",
                      "mean_misattribution", "misattribution_pred"};
    for (const auto& p : summarize(rows)) {
        summary.rows.push_back({format_real(p.axis_value), format_real(p.mean_ratio), format_real(p.std_ratio),
                                std::to_string(p.count), p.predicted_ratio.to_string(),
                                p.misattribution_count ? format_real(p.mean_misattribution) : std::string(),
                                format_real(p.misattribution_pred)});
        out << to_string(spec.axis) << "=" << format_real(p.axis_value) << " simulated=" << format_real(p.mean_ratio)
            << " predicted=" << p.predicted_ratio.to_string() << " n=" << p.count << "\n";
    }
    outputs.table("sweep_summary", summary, describe(spec));
    const bool any_failed = std::any_of(rows.begin(), rows.end(), [](const SweepRow& r) {
        return r.status != "ok" && r.status != "NoCrossing";
    });
    return any_failed ? kRuntime : kOk;
}

int run_genexp(const Options& o, std::ostream& out) {
    ExperimentConfig c = load(o);
    GenExpSpec spec = c.genexp;
    if (o.seed) spec.seed = static_cast<std::uint64_t>(*o.seed);
    const GenExpResult r = run_generalization(spec);
    Outputs(o, out).table("genexp", generalization_table(spec, r), {});
    out << "t_opt_stop: " << format_real(r.t_opt_stop) << "\n";
    out << "gen_at_opt: " << format_real(r.gen_at_opt) << "\n";
    out << "unimodal_baseline: " << format_real(r.unimodal_baseline) << "\n";
    out << "final_gen_error: " << format_real(r.final_gen_error) << "\n";
    out << "t_1: " << (r.t_1 ? format_real(*r.t_1) : std::string("none")) << "\n";
    out << "t_2: " << (r.t_2 ? format_real(*r.t_2) : std::string("none")) << "\n";
    return kOk;
}

int run_xor(const Options& o, std::ostream& out) {
    ExperimentConfig c = load(o);
    XorSpec spec = c.xor_spec;
    if (o.seed) spec.seed = static_cast<std::uint64_t>(*o.seed);
    const XorResult r = run_xor_demo(spec);
    Outputs outputs(o, out);
    const auto meta = describe(spec);
    outputs.table("xor_trajectory", trajectory_table(r.trajectory, false), meta);

    CsvTable layer;
    layer.header = {"unit", "w_A", "w_B0", "w_B1"};
    for (long i = 0; i < r.first_layer_B.rows(); ++i) {
        layer.rows.push_back({std::to_string(i), format_real(r.first_layer_A(i, 0)),
                              format_real(r.first_layer_B(i, 0)), format_real(r.first_layer_B(i, 1))});
    }
    outputs.table("xor_first_layer", layer, meta);
    out << "final_loss: " << format_real(r.final_loss) << "\n";
    return kOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Modality-bias experiments for multimodal linear networks", "unibias"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "YAML configuration file")->check(CLI::ExistingFile);
        sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        sub->add_option("--set", o.overrides, "override a config value, key=value (repeatable)")
            ->allow_extra_args(false);
        sub->add_option("--seed", o.seed, "seed override");
    };
    auto* stats = app.add_subcommand("stats", "population (and optionally empirical) correlation statistics");
    common(stats);
    stats->add_option("--samples", o.stats_samples, "also estimate from this many samples")
        ->check(CLI::NonNegativeNumber);
    auto* simulate = app.add_subcommand("simulate", "train one network and record its trajectory");
    common(simulate);
    auto* pred = app.add_subcommand("predict", "closed-form phase times and time ratio");
    common(pred);
    auto* sweep = app.add_subcommand("sweep", "simulated vs predicted time ratios over a grid");
    common(sweep);
    sweep->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    auto* genexp = app.add_subcommand("genexp", "generalization error during training");
    common(genexp);
    auto* xr = app.add_subcommand("xor", "nonlinear XOR demo");
    common(xr);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInvalid;
    }

    try {
        if (stats->parsed()) return run_stats(o, out);
        if (simulate->parsed()) return run_simulate(o, out, err);
        if (pred->parsed()) return run_predict(o, out);
        if (sweep->parsed()) return run_sweep_cmd(o, out);
        if (genexp->parsed()) return run_genexp(o, out);
        if (xr->parsed()) return run_xor(o, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kInvalid;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv = {"unibias"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace unibias::cli
