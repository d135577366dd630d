#pragma once

#include "chaosbench/forecasters.hpp"
#include "chaosbench/metrics.hpp"
#include "chaosbench/records.hpp"
#include "chaosbench/systems.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace chaosbench {

// ---------------------------------------------------------------------------
// Context transforms

struct ShuffleOptions {
    // Keep the last block in place and require the penultimate block to move.
    // With false every block may move and only the identity arrangement is
    // rejected.
    bool keep_final_block = true;
    int max_draws = 1000;
};

/// Rearranges length-k blocks of rows. Blocks are counted from the end, so a
/// ragged remainder block (C mod k rows) sits at the start and moves as a unit.
/// A Vector argument binds as a single column.
Matrix kgram_shuffle(const Eigen::Ref<const Matrix>& context, int k, Seed seed, ShuffleOptions opts = {});

// Factors exp(t·log f_min / (T−1)), t = 0..T−1.
Vector nonstationarity_factors(Index length, double f_min);
Matrix apply_nonstationarity(const Eigen::Ref<const Matrix>& values, double f_min);
Trajectory apply_nonstationarity(const Trajectory& traj, double f_min);

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { baseline, context_sweep, kgram_shuffle, nonstationary, ic_dependence };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentConfig {
    std::vector<std::string> systems;  // empty: every chaotic registry system
    int n_ics = 20;
    Index context_len = 512;
    Index horizon = 300;
    int granularity = 30;  // points per Lyapunov time
    Index train_len = 435;
    Index val_len = 77;
    bool tune = true;
    std::vector<std::string> models = {"naive", "nvar", "parrot"};
    ChannelMode mode = ChannelMode::channel_independent;
    Seed seed = 0;
    ExperimentKind kind = ExperimentKind::baseline;
    // baseline: {}; context_sweep: {"context_lens": [...]}; kgram_shuffle: {"k": [...]};
    // nonstationary: {"f_min": [...]}; ic_dependence: {"reference_length": N}
    nlohmann::json kind_params = nlohmann::json::object();
    std::vector<double> lookback_grid = default_lookback_grid();
    NvarConfig nvar;
    ParrotConfig parrot;
    MetricConfig metrics;
    IntegratorConfig integrator;
    bool attractor_metrics = true;  // d_frac and D_stsp on the joint forecast
    int threads = 0;                // 0: hardware concurrency
    double adapter_timeout = 300.0;  // seconds per request

    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Throws ConfigError naming the offending field.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Built-in models by id ("naive", "nvar", "parrot") or external adapters
/// ("extern:<command line>").
ForecasterPtr make_forecaster(const std::string& id, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Causal split

class SealedSegment;

/// Per-channel scores of an H×D forecast against the sealed test segment.
/// Attractor-level metrics (d_frac, D_stsp) are computed on the joint forecast
/// and shared by every channel's report.
std::vector<MetricReport> score_forecast(const SealedSegment& truth, const Eigen::Ref<const Matrix>& pred,
                                         const Eigen::Ref<const Matrix>& context, double dt_lyap,
                                         std::optional<double> reference_fractal_dim, bool attractor_metrics,
                                         const MetricConfig& cfg, Seed seed);

/// Test points a forecaster must never see. Only score_forecast can read them.
class SealedSegment {
public:
    explicit SealedSegment(Matrix values) : values_(std::move(values)) {}
    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }

private:
    Matrix values_;

    friend std::vector<MetricReport> score_forecast(const SealedSegment&, const Eigen::Ref<const Matrix>&,
                                                    const Eigen::Ref<const Matrix>&, double,
                                                    std::optional<double>, bool, const MetricConfig&, Seed);
};

struct TaskSplit {
    Matrix context;
    SealedSegment test;
};

// Last `horizon` rows sealed; the `context_len` rows before them form the context.
TaskSplit split_window(const Eigen::Ref<const Matrix>& window, Index context_len, Index horizon);

// ---------------------------------------------------------------------------
// Runner

/// Trajectories every experiment kind cuts its windows from: one per initial
/// condition, all ending on the same test segment. Length is max(needed, 812)
/// so contexts up to 512 share the baseline's test points.
std::vector<Matrix> generate_windows(const SystemSpec& spec, const ExperimentConfig& cfg, Index needed_len);

// Longest context any variant of `cfg` uses.
Index required_context(const ExperimentConfig& cfg);

struct RunOptions {
    // Replaces the models named in the config (used by tests to inject spies).
    std::vector<ForecasterPtr> models;
    std::function<void(const ResultRecord&)> sink;
    // Progress/diagnostic lines; defaults to stderr.
    std::function<void(const std::string&)> log;
};

struct RunSummary {
    std::size_t records = 0;
    std::size_t failures = 0;
    std::vector<std::string> skipped_systems;
    nlohmann::json summary = nlohmann::json::object();
};

/// Executes the experiment battery, emitting records through options.sink in
/// deterministic task order regardless of thread count.
RunSummary run_benchmark(const ExperimentConfig& cfg, const Registry& registry, const RunOptions& options = {});

// Collects every record in memory; convenience for tests and small runs.
std::vector<ResultRecord> run_collect(const ExperimentConfig& cfg, const Registry& registry,
                                      RunSummary* summary = nullptr, std::vector<ForecasterPtr> models = {});

// ---------------------------------------------------------------------------
// Statistics and aggregation

double median(std::vector<double> values);
// Standard error of the median by bootstrap.
double bootstrap_median_se(const std::vector<double>& values, int resamples, Seed seed);

struct CorrelationTest {
    std::optional<double> rho;  // nullopt when a rank variance is zero
    double p_greater = 1.0;     // one-sided, H1: rho > 0
    double p_less = 1.0;        // one-sided, H1: rho < 0
    std::size_t n = 0;
};

// Spearman rho with a label-permutation p-value.
CorrelationTest spearman_permutation(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                     int permutations, Seed seed);

struct PairedTest {
    double mean_difference = 0.0;
    double p_greater = 1.0;  // H1: mean(a − b) > 0
    std::size_t n = 0;
};

// Sign-flip permutation test on paired samples.
PairedTest paired_permutation(const std::vector<double>& a, const std::vector<double>& b, int permutations,
                              Seed seed);

struct MetricSummary {
    double median = 0.0;
    double standard_error = 0.0;
    std::size_t n = 0;
};

struct SummaryRow {
    std::vector<std::string> key;
    std::size_t n_ok = 0;
    std::size_t n_failed = 0;
    std::map<std::string, MetricSummary> metrics;  // vpt_lyap, smape_mean, d_frac_error, d_stsp, context_overlap
    Vector median_smape_curve;
};

struct SummaryTable {
    std::vector<std::string> group_keys;
    std::vector<SummaryRow> rows;  // first-appearance order
    std::vector<std::string> warnings;
};

// Value of a record field by dotted path, e.g. "model_id" or "kind_params.k".
std::string record_key(const ResultRecord& r, const std::string& path);

SummaryTable aggregate(const std::vector<ResultRecord>& records, const std::vector<std::string>& group_keys,
                       Seed seed = 0, int resamples = 1000);

/// Kind-specific headline statistics (median VPT per model and knob, trend
/// correlations, IC-density pairs).
nlohmann::json summarize(const std::vector<ResultRecord>& records, Seed seed = 0);

}  // namespace chaosbench
