#pragma once

#include "chaosbench/errors.hpp"
#include "chaosbench/types.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chaosbench {

/// One channel-independent prediction job.
struct ForecastTask {
    Vector context;
    Index horizon = 300;
    int channel_index = 0;
    double dt_lyap = 1.0 / 30.0;

    void validate() const;
};

struct Forecast {
    Vector values;
    std::string model_id;
    double fit_walltime = 0.0;        // seconds
    double inference_walltime = 0.0;  // seconds
    nlohmann::json metadata = nlohmann::json::object();
};

Forecast naive_forecast(const ForecastTask& task);

// ---------------------------------------------------------------------------
// Next-generation reservoir computer

struct NvarConfig {
    int n_lags = 1;
    int max_order = 2;
    double ridge = 1e-4;
    int stride = 1;

    void validate() const;
};

/// Readout over [1 | lagged states | unique degree-2 monomials of lags],
/// predicting the next state of every channel. The intercept is not
/// penalized, so a very large ridge collapses the model to the training mean.
class NvarModel {
public:
    NvarModel(NvarConfig cfg, Index channels, Vector intercept, Matrix weights);

    const NvarConfig& config() const noexcept { return cfg_; }
    Index channels() const noexcept { return channels_; }
    Index feature_count() const noexcept { return weights_.rows(); }
    // Number of past samples consumed per prediction.
    Index window() const noexcept { return static_cast<Index>(cfg_.n_lags - 1) * cfg_.stride + 1; }
    const Vector& intercept() const noexcept { return intercept_; }
    const Matrix& weights() const noexcept { return weights_; }  // features × channels

    // Next state given `history` whose last row is the current state.
    Vector predict_next(const Eigen::Ref<const Matrix>& history) const;

private:
    NvarConfig cfg_;
    Index channels_;
    Vector intercept_;
    Matrix weights_;
};

// Non-constant features at the last row of `history` (window() rows used).
Vector nvar_features(const Eigen::Ref<const Matrix>& history, const NvarConfig& cfg);

/// Ridge fit on a T×D training block (D = 1 for a single channel).
NvarModel nvar_fit(const Eigen::Ref<const Matrix>& train, const NvarConfig& cfg);

// Mean squared one-step training residual; used by tests and diagnostics.
double nvar_training_residual(const NvarModel& model, const Eigen::Ref<const Matrix>& train);

struct Rollout {
    Matrix values;  // H × D
    bool diverged = false;
};

/// Autoregressive rollout. Values leaving 100× the context amplitude envelope
/// are clipped and flagged.
Rollout nvar_rollout(const NvarModel& model, const Eigen::Ref<const Matrix>& context, Index horizon);

Forecast nvar_forecast(const NvarModel& model, const ForecastTask& task);

// ---------------------------------------------------------------------------
// Context parroting

enum class Similarity { pearson, zncc };

struct ParrotConfig {
    int motif_len = 30;
    int rematch_interval = 0;  // 0 → horizon, i.e. a single match unless the context runs out
    Similarity similarity = Similarity::pearson;

    void validate() const;
};

/// Finds the earlier context window that best matches the final `motif_len`
/// points and replays what followed it. When the replay reaches the end of the
/// context (or every `rematch_interval` outputs) the trailing emitted motif is
/// matched again. Metadata: "offsets", "scores", "low_confidence", "fallback".
Forecast parrot_forecast(const ForecastTask& task, const ParrotConfig& cfg = {});

// Similarity score between two equal-length windows; nullopt when undefined.
std::optional<double> window_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                        Similarity kind);

// Approximate 99th percentile of the best Pearson score among `candidates`
// windows of length `motif_len` drawn from unrelated noise.
double parrot_null_threshold(Index candidates, Index motif_len);

// ---------------------------------------------------------------------------
// Model contract

enum class ChannelMode { channel_independent, multivariate };

std::string to_string(ChannelMode mode);
ChannelMode channel_mode_from_string(const std::string& s);

/// A forecasting model. Implementations hold configuration only; every call
/// fits from scratch, so a Forecaster may be shared read-only across threads
/// as long as `forecast` is const-safe.
class Forecaster {
public:
    virtual ~Forecaster() = default;

    virtual std::string id() const = 0;
    virtual bool supports_multivariate() const { return false; }
    // True when the model has a lookback to tune.
    virtual bool tunable() const { return false; }
    virtual std::unique_ptr<Forecaster> with_lookback(int /*lags*/) const;
    virtual int lookback() const { return 0; }

    virtual Forecast forecast(const ForecastTask& task) const = 0;
    // Joint forecast of all channels; returns one Forecast per channel.
    virtual std::vector<Forecast> forecast_joint(const Eigen::Ref<const Matrix>& context, Index horizon,
                                                 double dt_lyap) const;
};

class NaiveForecaster final : public Forecaster {
public:
    std::string id() const override { return "naive"; }
    Forecast forecast(const ForecastTask& task) const override { return naive_forecast(task); }
};

class NvarForecaster final : public Forecaster {
public:
    explicit NvarForecaster(NvarConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    std::string id() const override { return "nvar"; }
    bool supports_multivariate() const override { return true; }
    bool tunable() const override { return true; }
    std::unique_ptr<Forecaster> with_lookback(int lags) const override;
    int lookback() const override { return cfg_.n_lags; }
    const NvarConfig& config() const noexcept { return cfg_; }

    Forecast forecast(const ForecastTask& task) const override;
    std::vector<Forecast> forecast_joint(const Eigen::Ref<const Matrix>& context, Index horizon,
                                         double dt_lyap) const override;

private:
    NvarConfig cfg_;
};

/// Zero-shot parroting model. Contexts shorter than two motifs shrink the motif
/// to half the context (minimum 2 points); below 4 points it falls back to the
/// naive forecast.
class ParrotForecaster final : public Forecaster {
public:
    explicit ParrotForecaster(ParrotConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    std::string id() const override { return "parrot"; }
    Forecast forecast(const ForecastTask& task) const override;

private:
    ParrotConfig cfg_;
};

using ForecasterPtr = std::shared_ptr<const Forecaster>;

/// Channel-independent mode forecasts each column of `context` in isolation;
/// multivariate mode calls forecast_joint and requires model support.
std::vector<Forecast> forecast_multichannel(const Forecaster& model, const Eigen::Ref<const Matrix>& context,
                                            Index horizon, double dt_lyap, ChannelMode mode);

// ---------------------------------------------------------------------------
// Lookback tuning

struct TuneRow {
    double lookback_lyap = 0.0;
    int lags = 0;
    double score = 0.0;  // mean validation sMAPE, +inf on failure
    std::string failure;
};

struct TuneResult {
    double best_lookback_lyap = 0.0;
    int best_lags = 0;
    std::vector<TuneRow> table;
};

// Default grid of lookbacks in Lyapunov times.
std::vector<double> default_lookback_grid();

int lookback_to_lags(double lookback_lyap, int points_per_lyapunov);

/// Scores each grid value by fitting on the first `train_len` rows of every
/// trajectory and forecasting the next `val_len` rows; returns the value with
/// the lowest mean validation sMAPE (smaller lookback on ties).
TuneResult tune_lookback(const Forecaster& model, const std::vector<Matrix>& trajectories, Index train_len,
                         Index val_len, const std::vector<double>& grid, int points_per_lyapunov,
                         ChannelMode mode, double dt_lyap);

}  // namespace chaosbench
