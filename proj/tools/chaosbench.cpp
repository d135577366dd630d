// Command-line front end: trajectory export, experiment runs, reports,
// pendulum ingestion, adapter conformance and registry annotation.

#include "chaosbench/adapter.hpp"
#include "chaosbench/experiments.hpp"
#include "chaosbench/io.hpp"
#include "chaosbench/records.hpp"
#include "chaosbench/systems.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace chaosbench;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitConformance = 3;

std::string default_out_dir() {
    const char* env = std::getenv("CHAOSBENCH_OUT");
    return env && *env ? env : "results";
}

Registry load_registry(const std::string& path) {
    return Registry::load(path.empty() ? Registry::default_path() : path);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void apply_kind_defaults(ExperimentConfig& cfg, ExperimentKind kind) {
    cfg.kind = kind;
    auto& p = cfg.kind_params;
    if (!p.is_object()) p = json::object();
    switch (kind) {
        case ExperimentKind::context_sweep:
            if (!p.contains("context_lens")) p["context_lens"] = {5, 16, 51, 160, 512};
            break;
        case ExperimentKind::kgram_shuffle:
            if (!p.contains("k")) p["k"] = {1, 2, 4, 8, 16, 32, 64, 128};
            break;
        case ExperimentKind::nonstationary:
            if (!p.contains("f_min")) p["f_min"] = {1.0, 0.8, 0.6, 0.4, 0.2};
            break;
        default:
            break;
    }
}

struct RunArgs {
    std::string config;
    std::string out = default_out_dir();
    std::string registry;
    int threads = -1;
};

int do_run(const RunArgs& args, std::optional<ExperimentKind> force_kind) {
    ExperimentConfig cfg;
    try {
        if (!args.config.empty()) cfg = load_experiment_config(args.config);
        if (force_kind) apply_kind_defaults(cfg, *force_kind);
        if (args.threads >= 0) cfg.threads = args.threads;
        cfg.validate();
    } catch (const ConfigError& e) {
        std::cerr << "config error at " << (args.config.empty() ? "<defaults>" : args.config) << ": " << e.what() << '\n';
        return kExitConfig;
    }

    const Registry registry = load_registry(args.registry);
    fs::create_directories(args.out);
    const std::string records_path = (fs::path(args.out) / "records.jsonl").string();
    RecordAppender appender(records_path);

    RunManifest manifest;
    manifest.config_hash = config_hash(cfg);
    manifest.harness_version = harness_version();
    manifest.registry_checksum = registry.checksum();
    manifest.master_seed = cfg.seed;
    manifest.start_time = utc_timestamp();

    RunOptions opts;
    std::size_t ok = 0, failed = 0;
    opts.sink = [&](const ResultRecord& r) {
        appender.append(r);
        (r.ok() ? ok : failed)++;
    };
    const RunSummary summary = run_benchmark(cfg, registry, opts);

    manifest.end_time = utc_timestamp();
    manifest.record_count = summary.records;
    manifest.success_count = ok;
    manifest.failure_count = failed;
    manifest.summary = summary.summary;
    manifest.summary["config"] = to_json(cfg);
    write_manifest(manifest, (fs::path(args.out) / "manifest.json").string());

    std::cout << "records: " << summary.records << " (" << failed << " failed) -> " << records_path << '\n';
    std::cout << summary.summary.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Chaotic-system forecasting benchmark harness"};
    app.require_subcommand(1);
    app.set_version_flag("--version", harness_version());

    // integrate
    std::string sys_name, traj_out = default_out_dir(), registry_path;
    int n_ics = 1, granularity = 30;
    Index length = 812;
    Seed seed = 0;
    auto* integrate_cmd = app.add_subcommand("integrate", "Write benchmark trajectories as CSV");
    integrate_cmd->add_option("system", sys_name, "System name")->required();
    integrate_cmd->add_option("--ics", n_ics, "Number of initial conditions");
    integrate_cmd->add_option("--length", length, "Samples per trajectory");
    integrate_cmd->add_option("--granularity", granularity, "Points per Lyapunov time");
    integrate_cmd->add_option("--seed", seed, "Master seed");
    integrate_cmd->add_option("--out", traj_out, "Output directory");
    integrate_cmd->add_option("--registry", registry_path, "System registry file");

    // run and kind-specific wrappers
    RunArgs run_args;
    auto add_run = [&](const std::string& name, const std::string& help, bool config_required) {
        auto* cmd = app.add_subcommand(name, help);
        auto* opt = cmd->add_option("config", run_args.config, "Experiment config (JSON)");
        if (config_required) opt->required();
        cmd->add_option("--out", run_args.out, "Output directory (default $CHAOSBENCH_OUT or ./results)");
        cmd->add_option("--registry", run_args.registry, "System registry file");
        cmd->add_option("--threads", run_args.threads, "Worker threads (0 = all cores)");
        return cmd;
    };
    auto* run_cmd = add_run("run", "Run an experiment config", true);
    auto* shuffle_cmd = add_run("shuffle-run", "k-gram shuffle experiment", false);
    auto* nonstat_cmd = add_run("nonstat-run", "Nonstationarity experiment", false);
    auto* sweep_cmd = add_run("context-sweep", "Context-length sweep", false);
    auto* ic_cmd = add_run("ic-run", "Initial-condition dependence experiment", false);

    // report
    std::vector<std::string> record_files;
    std::string group_by = "model_id", format = "md", curves_path;
    double report_dt = 1.0 / 30.0;
    auto* report_cmd = app.add_subcommand("report", "Aggregate record files");
    report_cmd->add_option("records", record_files, "records.jsonl files")->required();
    report_cmd->add_option("--group-by", group_by, "Comma-separated keys (dotted paths allowed)");
    report_cmd->add_option("--format", format, "csv or md")->check(CLI::IsMember({"csv", "md"}));
    report_cmd->add_option("--curves", curves_path, "Write per-horizon median sMAPE curves CSV here");
    report_cmd->add_option("--dt-lyap", report_dt, "Sampling interval for the curves' time column");

    // ingest-pendulum
    std::string pendulum_csv, pendulum_out;
    double fps = 400.0;
    auto* pend_cmd = app.add_subcommand("ingest-pendulum", "Convert pendulum centroid tracks to angles");
    pend_cmd->add_option("csv", pendulum_csv, "pivot_x,pivot_y,hinge_x,hinge_y,tip_x,tip_y per frame")->required();
    pend_cmd->add_option("--out", pendulum_out, "Output trajectory CSV")->required();
    pend_cmd->add_option("--fps", fps, "Frame rate");

    // serve-check
    std::string adapter_cmd;
    double adapter_timeout = 30.0;
    auto* serve_cmd = app.add_subcommand("serve-check", "Adapter protocol conformance suite");
    serve_cmd->add_option("adapter", adapter_cmd, "Adapter command line")->required();
    serve_cmd->add_option("--timeout", adapter_timeout, "Per-request timeout, seconds");

    // annotate
    std::string annotate_systems, annotate_out;
    double lyap_horizon = 0.0;
    Index dim_points = 50000;
    auto* annotate_cmd = app.add_subcommand("annotate", "Estimate λ and correlation dimension for registry systems");
    annotate_cmd->add_option("--registry", registry_path, "System registry file");
    annotate_cmd->add_option("--systems", annotate_systems, "Comma-separated subset");
    annotate_cmd->add_option("--horizon", lyap_horizon, "Lyapunov orbit length (time units; default 1000 τ)");
    annotate_cmd->add_option("--points", dim_points, "Orbit points for the correlation dimension");
    annotate_cmd->add_option("--seed", seed, "Seed");
    annotate_cmd->add_option("--write", annotate_out, "Write an updated registry here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*integrate_cmd) {
            const Registry reg = load_registry(registry_path);
            const SystemSpec& spec = reg.get(sys_name);
            const Matrix ics = sample_initial_conditions(spec, n_ics, {}, derive_seed(seed, fnv1a(spec.name), 1));
            fs::create_directories(traj_out);
            for (int i = 0; i < n_ics; ++i) {
                const Trajectory t = generate_trajectory(spec, ics.row(i).transpose(), length, granularity);
                TrajectoryMeta meta;
                meta.system = spec.name;
                meta.seed = seed;
                meta.ic_index = i;
                meta.granularity = granularity;
                const auto path = (fs::path(traj_out) / (spec.name + "_ic" + std::to_string(i) + ".csv")).string();
                write_trajectory_csv(t, meta, path);
                std::cout << path << '\n';
            }
            return 0;
        }
        if (*run_cmd) return do_run(run_args, std::nullopt);
        if (*shuffle_cmd) return do_run(run_args, ExperimentKind::kgram_shuffle);
        if (*nonstat_cmd) return do_run(run_args, ExperimentKind::nonstationary);
        if (*sweep_cmd) return do_run(run_args, ExperimentKind::context_sweep);
        if (*ic_cmd) return do_run(run_args, ExperimentKind::ic_dependence);

        if (*report_cmd) {
            std::vector<ResultRecord> records;
            for (const auto& f : record_files) {
                LoadResult lr = load_records(f);
                if (lr.corrupt_lines) std::cerr << f << ": skipped " << lr.corrupt_lines << " corrupt line(s)\n";
                records.insert(records.end(), std::make_move_iterator(lr.records.begin()),
                               std::make_move_iterator(lr.records.end()));
            }
            const SummaryTable table = aggregate(records, split_list(group_by));
            for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << format_table(table, format);
            if (!curves_path.empty()) {
                std::ofstream out(curves_path);
                if (!out) throw InvalidArgument("cannot write " + curves_path);
                out << format_curves(table, report_dt);
            }
            return 0;
        }

        if (*pend_cmd) {
            const Trajectory t = ingest_pendulum(read_pendulum_csv(pendulum_csv, fps));
            TrajectoryMeta meta;
            meta.system = "double_pendulum";
            meta.granularity = 0;
            meta.extra = {{"fps", fps}, {"channels", {"theta1", "theta2", "theta1_dot", "theta2_dot"}},
                          {"units", "rad, rad/s"}, {"source", pendulum_csv}};
            write_trajectory_csv(t, meta, pendulum_out);
            std::cout << pendulum_out << " (" << t.length() << " rows)\n";
            return 0;
        }

        if (*serve_cmd) {
            AdapterOptions opts;
            opts.command = adapter_cmd;
            opts.request_timeout = adapter_timeout;
            bool all_ok = true;
            for (const auto& c : run_conformance(opts)) {
                std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
                if (!c.detail.empty()) std::cout << " -- " << c.detail;
                std::cout << '\n';
                all_ok = all_ok && c.passed;
            }
            return all_ok ? 0 : kExitConformance;
        }

        if (*annotate_cmd) {
            const Registry reg = load_registry(registry_path);
            const auto wanted = split_list(annotate_systems);
            std::vector<SystemSpec> updated;
            json report = json::array();
            for (SystemSpec spec : reg.systems()) {
                if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), spec.name) == wanted.end()) {
                    updated.push_back(spec);
                    continue;
                }
                const double tau = spec.lyapunov_exponent > 0.0 ? 1.0 / spec.lyapunov_exponent : 1.0;
                const double horizon = lyap_horizon > 0.0 ? lyap_horizon : std::max(1000.0 * tau, 2000.0);
                const LyapunovEstimate le = estimate_lyapunov(spec, {}, horizon, derive_seed(seed, fnv1a(spec.name), 5));
                json row = {{"system", spec.name}, {"lyapunov_exponent", le.exponent}, {"standard_error", le.standard_error}};
                if (spec.chaotic && le.exponent > 0.0) {
                    spec.lyapunov_exponent = le.exponent;
                    const Matrix x0 = sample_initial_conditions(spec, 1, {}, derive_seed(seed, fnv1a(spec.name), 6));
                    const Trajectory orbit = generate_trajectory(spec, x0.row(0).transpose(), dim_points, 30);
                    MetricConfig mc;
                    mc.rng_seed = derive_seed(seed, fnv1a(spec.name), 7);
                    spec.reference_fractal_dim = std::min<double>(correlation_dimension(orbit.values, mc), spec.dim);
                    row["reference_fractal_dim"] = spec.reference_fractal_dim;
                }
                std::cerr << row.dump() << '\n';
                report.push_back(row);
                updated.push_back(spec);
            }
            std::cout << report.dump(2) << '\n';
            if (!annotate_out.empty()) {
                std::ofstream out(annotate_out);
                out << Registry(updated).to_json_text();
            }
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
