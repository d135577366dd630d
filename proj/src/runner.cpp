#include "chaosbench/adapter.hpp"
#include "chaosbench/experiments.hpp"

#include <atomic>
#include <chrono>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

namespace chaosbench {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// Baseline window: 512 context + 300 test points.
constexpr Index kBaseWindow = 812;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

struct Variant {
    json params = json::object();
    Index context_len = 0;
    int k = 0;
    bool shuffled = false;
    double f_min = 1.0;
};

std::vector<Variant> build_variants(const ExperimentConfig& cfg) {
    std::vector<Variant> out;
    const auto& p = cfg.kind_params;
    switch (cfg.kind) {
        case ExperimentKind::baseline:
        case ExperimentKind::ic_dependence:
            out.push_back({json::object(), cfg.context_len});
            break;
        case ExperimentKind::context_sweep:
            for (const auto& c : p.at("context_lens"))
                out.push_back({json{{"context_len", c.get<Index>()}}, c.get<Index>()});
            break;
        case ExperimentKind::kgram_shuffle:
            for (const auto& kv : p.at("k")) {
                const int k = kv.get<int>();
                Variant shuffled{json{{"k", k}, {"condition", "shuffled"}}, cfg.context_len, k, true};
                // A single point is not a forecastable context; truncation keeps at least two.
                Variant truncated{json{{"k", k}, {"condition", "truncated"}}, std::max<Index>(k, 2), k, false};
                out.push_back(shuffled);
                out.push_back(truncated);
            }
            break;
        case ExperimentKind::nonstationary:
            for (const auto& f : p.at("f_min")) {
                Variant v{json{{"f_min", f.get<double>()}}, cfg.context_len};
                v.f_min = f.get<double>();
                out.push_back(v);
            }
            break;
    }
    return out;
}

struct SystemData {
    const SystemSpec* spec = nullptr;
    std::vector<Matrix> windows;
    std::vector<double> density;           // ic_dependence only
    std::vector<double> relative_density;  // ic_dependence only
    bool ok = false;
    std::string error;
};

struct TuneEntry {
    ForecasterPtr model;
    double walltime = 0.0;
    json meta = json::object();
};

std::pair<Index, Index> tuning_split(const ExperimentConfig& cfg, Index context_len) {
    if (context_len == cfg.context_len) return {cfg.train_len, cfg.val_len};
    const double frac = static_cast<double>(cfg.val_len) / static_cast<double>(cfg.train_len + cfg.val_len);
    const Index val = std::max<Index>(1, std::lround(frac * static_cast<double>(context_len)));
    return {context_len - val, val};
}

Matrix variant_window(const Matrix& full, const Variant& v, Index horizon) {
    Matrix w = full.bottomRows(v.context_len + horizon);
    if (v.f_min != 1.0) w = apply_nonstationarity(w, v.f_min);
    return w;
}

Matrix variant_context(const Matrix& window, const Variant& v, Index horizon, Seed shuffle_seed) {
    TaskSplit split = split_window(window, v.context_len, horizon);
    if (v.shuffled) return kgram_shuffle(split.context, v.k, shuffle_seed);
    return std::move(split.context);
}

Seed shuffle_seed(const ExperimentConfig& cfg, const std::string& system, int ic, int k) {
    return derive_seed(cfg.seed, fnv1a(system), static_cast<std::uint64_t>(ic), static_cast<std::uint64_t>(k), 2);
}

// Density of each IC's final context point under the reference orbit's
// mixture, relative to the median density at independent on-attractor points.
void annotate_density(SystemData& data, const ExperimentConfig& cfg) {
    const SystemSpec& spec = *data.spec;
    const Index ref_len = cfg.kind_params.value("reference_length", Index{10000});
    const Matrix ref_ic = sample_initial_conditions(spec, 2, cfg.integrator, derive_seed(cfg.seed, fnv1a(spec.name), 3));
    const Matrix orbit = generate_trajectory(spec, ref_ic.row(0).transpose(), ref_len, cfg.granularity, cfg.integrator).values;
    const Matrix probe_orbit =
        generate_trajectory(spec, ref_ic.row(1).transpose(), 500 * 7, cfg.granularity, cfg.integrator).values;

    const double floor = cfg.metrics.kl_bandwidth_floor * trajectory_extent(orbit);
    const GaussianMixture mix = mixture_from_trajectory(orbit, floor);
    std::vector<double> probe;
    for (Index i = 0; i < probe_orbit.rows(); i += 7) probe.push_back(mix.density(probe_orbit.row(i).transpose()));
    const double typical = median(probe);

    for (const Matrix& w : data.windows) {
        const Vector q = w.row(w.rows() - cfg.horizon - 1).transpose();
        const double d = mix.density(q);
        data.density.push_back(d);
        data.relative_density.push_back(typical > 0.0 ? d / typical : 0.0);
    }
}

struct Task {
    std::size_t system;
    std::size_t variant;
    int ic;
    std::size_t model;
};

}  // namespace

// ---------------------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::baseline: return "baseline";
        case ExperimentKind::context_sweep: return "context_sweep";
        case ExperimentKind::kgram_shuffle: return "kgram_shuffle";
        case ExperimentKind::nonstationary: return "nonstationary";
        case ExperimentKind::ic_dependence: return "ic_dependence";
    }
    return "baseline";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
    for (auto k : {ExperimentKind::baseline, ExperimentKind::context_sweep, ExperimentKind::kgram_shuffle,
                   ExperimentKind::nonstationary, ExperimentKind::ic_dependence})
        if (to_string(k) == s) return k;
    throw InvalidArgument("unknown experiment kind '" + s + "'");
}

ForecasterPtr make_forecaster(const std::string& id, const ExperimentConfig& cfg) {
    if (id == "naive") return std::make_shared<NaiveForecaster>();
    if (id == "nvar") return std::make_shared<NvarForecaster>(cfg.nvar);
    if (id == "parrot") return std::make_shared<ParrotForecaster>(cfg.parrot);
    if (id.rfind("extern:", 0) == 0) {
        AdapterOptions opts;
        opts.command = id.substr(7);
        opts.request_timeout = cfg.adapter_timeout;
        return std::make_shared<ExternalForecaster>(opts);
    }
    throw InvalidArgument("unknown model '" + id + "'");
}

TaskSplit split_window(const Eigen::Ref<const Matrix>& window, Index context_len, Index horizon) {
    if (horizon < 1 || context_len < 1) throw InvalidArgument("split_window: lengths must be positive");
    if (window.rows() < context_len + horizon)
        throw InvalidArgument("split_window: window holds " + std::to_string(window.rows()) + " rows, needs " +
                              std::to_string(context_len + horizon));
    const Index end = window.rows() - horizon;
    return {window.middleRows(end - context_len, context_len), SealedSegment(window.bottomRows(horizon))};
}

std::vector<MetricReport> score_forecast(const SealedSegment& truth, const Eigen::Ref<const Matrix>& pred,
                                         const Eigen::Ref<const Matrix>& context, double dt_lyap,
                                         std::optional<double> reference_fractal_dim, bool attractor_metrics,
                                         const MetricConfig& cfg, Seed seed) {
    const Matrix& test = truth.values_;
    if (pred.rows() != test.rows() || pred.cols() != test.cols())
        throw InvalidArgument("score_forecast: forecast shape does not match the test segment");
    if (!pred.allFinite()) throw NumericFailure("score_forecast: forecast contains non-finite values");

    MetricReport shared;
    if (attractor_metrics) {
        if (pred.rows() >= cfg.gp_hard_min_points) {
            double d = 0.0;
            try {
                d = correlation_dimension(pred, cfg);
            } catch (const DegenerateGeometry&) {
                d = 0.0;
            }
            shared.d_frac_pred = d;
            if (reference_fractal_dim) shared.d_frac_error = std::abs(d - *reference_fractal_dim);
        }
        if (pred.rows() >= 2) {
            MetricConfig kl_cfg = cfg;
            kl_cfg.rng_seed = seed;
            const KlEstimate kl = kl_attractor(test, pred, kl_cfg);
            shared.d_stsp = kl.value;
            shared.d_stsp_se = kl.standard_error;
        }
    }

    std::vector<MetricReport> out;
    for (Index c = 0; c < test.cols(); ++c) {
        MetricReport r = shared;
        r.smape_curve = smape_curve(test.col(c), pred.col(c));
        r.vpt_lyap = vpt_from_curve(r.smape_curve, cfg.vpt_epsilon, dt_lyap);
        if (context.rows() >= 2 * static_cast<Index>(cfg.overlap_min_len)) {
            try {
                r.context_overlap = (cfg.overlap_max_length
                                         ? context_overlap_any_length(context.col(c), cfg.overlap_min_len)
                                         : context_overlap(context.col(c), cfg.overlap_min_len))
                                        .value;
            } catch (const UndefinedSimilarity&) {
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

Index required_context(const ExperimentConfig& cfg) {
    Index c = cfg.context_len;
    if (cfg.kind == ExperimentKind::context_sweep)
        for (const auto& v : cfg.kind_params.at("context_lens")) c = std::max(c, v.get<Index>());
    return c;
}

std::vector<Matrix> generate_windows(const SystemSpec& spec, const ExperimentConfig& cfg, Index needed_len) {
    const Index len = std::max(needed_len, kBaseWindow);
    const Matrix ics =
        sample_initial_conditions(spec, cfg.n_ics, cfg.integrator, derive_seed(cfg.seed, fnv1a(spec.name), 1));
    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(cfg.n_ics));
    for (int i = 0; i < cfg.n_ics; ++i)
        out.push_back(generate_trajectory(spec, ics.row(i).transpose(), len, cfg.granularity, cfg.integrator).values);
    return out;
}

RunSummary run_benchmark(const ExperimentConfig& cfg, const Registry& registry, const RunOptions& options) {
    cfg.validate();
    const auto log = options.log ? options.log : [](const std::string& s) { std::cerr << s << '\n'; };
    const int threads = resolve_threads(cfg.threads);
    const double dt_lyap = 1.0 / cfg.granularity;

    std::vector<ForecasterPtr> models = options.models;
    if (models.empty())
        for (const auto& id : cfg.models) models.push_back(make_forecaster(id, cfg));

    const std::vector<std::string> names = cfg.systems.empty() ? registry.chaotic_names() : cfg.systems;
    for (const auto& n : names)
        if (!registry.contains(n)) throw InvalidArgument("system '" + n + "' is not registered");

    const auto variants = build_variants(cfg);
    const Index needed = required_context(cfg) + cfg.horizon;

    // Trajectories per system.
    std::vector<SystemData> systems(names.size());
    parallel_for(names.size(), threads, [&](std::size_t s) {
        SystemData& data = systems[s];
        data.spec = &registry.get(names[s]);
        try {
            data.windows = generate_windows(*data.spec, cfg, needed);
            if (cfg.kind == ExperimentKind::ic_dependence) annotate_density(data, cfg);
            data.ok = true;
        } catch (const Error& e) {
            data.error = e.what();
        }
    });

    RunSummary summary;
    for (const auto& data : systems)
        if (!data.ok) {
            log("skipping system " + data.spec->name + ": " + data.error);
            summary.skipped_systems.push_back(data.spec->name);
        }

    // Lookback tuning per (system, variant, model), on contexts only.
    std::vector<TuneEntry> tuned(systems.size() * variants.size() * models.size());
    auto tune_index = [&](std::size_t s, std::size_t v, std::size_t m) {
        return (s * variants.size() + v) * models.size() + m;
    };
    parallel_for(tuned.size(), threads, [&](std::size_t idx) {
        const std::size_t m = idx % models.size();
        const std::size_t v = (idx / models.size()) % variants.size();
        const std::size_t s = idx / (models.size() * variants.size());
        TuneEntry& entry = tuned[idx];
        entry.model = models[m];
        if (!systems[s].ok || !cfg.tune || !models[m]->tunable()) return;

        const auto start = Clock::now();
        const Variant& var = variants[v];
        const auto [train, val] = tuning_split(cfg, var.context_len);
        if (train < 2) {
            entry.meta = {{"tuned", false}, {"tune_failure", "context too short to split"}};
            return;
        }
        try {
            std::vector<Matrix> contexts;
            for (int ic = 0; ic < cfg.n_ics; ++ic) {
                const Matrix w = variant_window(systems[s].windows[static_cast<std::size_t>(ic)], var, cfg.horizon);
                contexts.push_back(variant_context(w, var, cfg.horizon,
                                                   shuffle_seed(cfg, systems[s].spec->name, ic, var.k)));
            }
            const TuneResult r =
                tune_lookback(*models[m], contexts, train, val, cfg.lookback_grid, cfg.granularity, cfg.mode, dt_lyap);
            entry.model = models[m]->with_lookback(r.best_lags);
            json table = json::array();
            for (const auto& row : r.table)
                table.push_back({{"lookback_lyap", row.lookback_lyap},
                                 {"lags", row.lags},
                                 {"score", std::isfinite(row.score) ? json(row.score) : json(nullptr)}});
            entry.meta = {{"tuned", true},
                          {"lookback_lyap", r.best_lookback_lyap},
                          {"lags", r.best_lags},
                          {"tuning_table", table}};
        } catch (const Error& e) {
            entry.meta = {{"tuned", false}, {"tune_failure", e.what()}};
        }
        entry.walltime = seconds_since(start);
    });

    std::vector<Task> tasks;
    for (std::size_t s = 0; s < systems.size(); ++s) {
        if (!systems[s].ok) continue;
        for (std::size_t v = 0; v < variants.size(); ++v)
            for (int ic = 0; ic < cfg.n_ics; ++ic)
                for (std::size_t m = 0; m < models.size(); ++m) tasks.push_back({s, v, ic, m});
    }

    std::vector<std::optional<std::vector<ResultRecord>>> done(tasks.size());
    std::size_t next_emit = 0;
    std::mutex emit_mutex;
    std::vector<ResultRecord> all;

    auto run_task = [&](const Task& t) {
        const SystemData& data = systems[t.system];
        const SystemSpec& spec = *data.spec;
        const Variant& var = variants[t.variant];
        const TuneEntry& entry = tuned[tune_index(t.system, t.variant, t.model)];
        const Forecaster& model = *entry.model;
        const std::string model_id = models[t.model]->id();
        const Seed seed = derive_seed(cfg.seed, fnv1a(spec.name), fnv1a(var.params.dump()),
                                      static_cast<std::uint64_t>(t.ic), fnv1a(model_id));

        ResultRecord base;
        base.system = spec.name;
        base.ic_index = t.ic;
        base.model_id = model_id;
        base.experiment_kind = to_string(cfg.kind);
        base.kind_params = var.params;
        base.mode = to_string(cfg.mode);
        base.seed = seed;
        base.harness_version = harness_version();
        base.walltimes.tune = entry.walltime;
        if (cfg.kind == ExperimentKind::ic_dependence) {
            base.analysis = {{"density", data.density[static_cast<std::size_t>(t.ic)]},
                             {"relative_density", data.relative_density[static_cast<std::size_t>(t.ic)]}};
        }

        const Index d = data.windows.front().cols();
        std::vector<ResultRecord> out;
        try {
            const Matrix window = variant_window(data.windows[static_cast<std::size_t>(t.ic)], var, cfg.horizon);
            TaskSplit split = split_window(window, var.context_len, cfg.horizon);
            if (var.shuffled) split.context = kgram_shuffle(split.context, var.k, shuffle_seed(cfg, spec.name, t.ic, var.k));

            const auto forecasts = forecast_multichannel(model, split.context, cfg.horizon, dt_lyap, cfg.mode);
            if (static_cast<Index>(forecasts.size()) != d)
                throw InvalidArgument("model returned " + std::to_string(forecasts.size()) + " channels, expected " +
                                      std::to_string(d));
            Matrix pred(cfg.horizon, d);
            for (Index c = 0; c < d; ++c) {
                if (forecasts[static_cast<std::size_t>(c)].values.size() != cfg.horizon)
                    throw InvalidArgument("model returned a forecast of the wrong length");
                pred.col(c) = forecasts[static_cast<std::size_t>(c)].values;
            }
            const std::optional<double> ref =
                spec.reference_fractal_dim > 0.0 ? std::optional<double>(spec.reference_fractal_dim) : std::nullopt;
            const auto reports = score_forecast(split.test, pred, split.context, dt_lyap, ref, cfg.attractor_metrics,
                                                cfg.metrics, seed);
            for (Index c = 0; c < d; ++c) {
                const Forecast& f = forecasts[static_cast<std::size_t>(c)];
                ResultRecord r = base;
                r.channel = static_cast<int>(c);
                r.metrics = reports[static_cast<std::size_t>(c)];
                r.walltimes.fit = f.fit_walltime;
                r.walltimes.inference = f.inference_walltime;
                r.forecast_meta = f.metadata;
                for (auto it = entry.meta.begin(); it != entry.meta.end(); ++it)
                    if (it.key() != "tuning_table") r.forecast_meta[it.key()] = it.value();
                out.push_back(std::move(r));
            }
        } catch (const std::exception& e) {
            out.clear();
            for (Index c = 0; c < d; ++c) {
                ResultRecord r = base;
                r.channel = static_cast<int>(c);
                r.status = "failed";
                r.failure_reason = e.what();
                r.forecast_meta = entry.meta;
                r.forecast_meta.erase("tuning_table");
                out.push_back(std::move(r));
            }
        }
        return out;
    };

    parallel_for(tasks.size(), threads, [&](std::size_t i) {
        auto records = run_task(tasks[i]);
        std::lock_guard lock(emit_mutex);
        done[i] = std::move(records);
        // Emit in task order so the stream does not depend on scheduling.
        while (next_emit < done.size() && done[next_emit]) {
            for (auto& r : *done[next_emit]) {
                r.timestamp = utc_timestamp();
                if (options.sink) options.sink(r);
                ++summary.records;
                if (!r.ok()) ++summary.failures;
                all.push_back(std::move(r));
            }
            done[next_emit].reset();
            ++next_emit;
        }
    });

    summary.summary = summarize(all, cfg.seed);
    if (!summary.skipped_systems.empty()) summary.summary["skipped_systems"] = summary.skipped_systems;
    return summary;
}

std::vector<ResultRecord> run_collect(const ExperimentConfig& cfg, const Registry& registry, RunSummary* summary,
                                      std::vector<ForecasterPtr> models) {
    std::vector<ResultRecord> out;
    RunOptions opts;
    opts.models = std::move(models);
    opts.sink = [&](const ResultRecord& r) { out.push_back(r); };
    RunSummary s = run_benchmark(cfg, registry, opts);
    if (summary) *summary = std::move(s);
    return out;
}

}  // namespace chaosbench
