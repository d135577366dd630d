#include "chaosbench/forecasters.hpp"

#include <chrono>

namespace chaosbench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

Index feature_count(Index channels, const NvarConfig& cfg) {
    const Index lin = channels * cfg.n_lags;
    return cfg.max_order >= 2 ? lin + lin * (lin + 1) / 2 : lin;
}

void fill_features(const Eigen::Ref<const Matrix>& history, Index last, const NvarConfig& cfg,
                   Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) {
    const Index d = history.cols();
    const Index lin = d * cfg.n_lags;
    for (int l = 0; l < cfg.n_lags; ++l)
        out.segment(l * d, d) = history.row(last - static_cast<Index>(l) * cfg.stride);
    if (cfg.max_order < 2) return;
    Index pos = lin;
    for (Index i = 0; i < lin; ++i)
        for (Index j = i; j < lin; ++j) out(pos++) = out(i) * out(j);
}

template <typename Solver>
bool singular(const Solver& ldlt, double ridge) {
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return true;
    // Without regularization a rank-deficient design has no unique readout.
    return ridge == 0.0 && ldlt.rcond() < 1e-12;
}

}  // namespace

void NvarConfig::validate() const {
    if (n_lags < 1) throw InvalidArgument("nvar: n_lags must be >= 1");
    if (max_order != 1 && max_order != 2) throw InvalidArgument("nvar: max_order must be 1 or 2");
    if (!(ridge >= 0.0)) throw InvalidArgument("nvar: ridge must be non-negative");
    if (stride < 1) throw InvalidArgument("nvar: stride must be >= 1");
}

NvarModel::NvarModel(NvarConfig cfg, Index channels, Vector intercept, Matrix weights)
    : cfg_(cfg), channels_(channels), intercept_(std::move(intercept)), weights_(std::move(weights)) {}

Vector nvar_features(const Eigen::Ref<const Matrix>& history, const NvarConfig& cfg) {
    const Index window = static_cast<Index>(cfg.n_lags - 1) * cfg.stride + 1;
    if (history.rows() < window) throw InvalidArgument("nvar: history shorter than the lag window");
    Eigen::RowVectorXd row(feature_count(history.cols(), cfg));
    fill_features(history, history.rows() - 1, cfg, row);
    return row.transpose();
}

Vector NvarModel::predict_next(const Eigen::Ref<const Matrix>& history) const {
    if (history.cols() != channels_) throw InvalidArgument("nvar: channel count mismatch");
    const Vector phi = nvar_features(history, cfg_);
    return intercept_ + weights_.transpose() * phi;
}

NvarModel nvar_fit(const Eigen::Ref<const Matrix>& train, const NvarConfig& cfg) {
    cfg.validate();
    const Index window = static_cast<Index>(cfg.n_lags - 1) * cfg.stride + 1;
    const Index t_len = train.rows();
    if (t_len < window + 2) throw InvalidArgument("nvar: training series too short for the lag window");
    if (!train.allFinite()) throw InvalidArgument("nvar: training data is not finite");

    const Index d = train.cols();
    const Index n = t_len - window;  // number of (features, next state) pairs
    const Index f = feature_count(d, cfg);

    Matrix phi(n, f);
    for (Index r = 0; r < n; ++r) fill_features(train, window - 1 + r, cfg, phi.row(r));
    Matrix y = train.bottomRows(n);

    const Eigen::RowVectorXd phi_mean = phi.colwise().mean();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    phi.rowwise() -= phi_mean;
    y.rowwise() -= y_mean;

    Matrix w;
    if (f <= n) {
        Matrix gram = phi.transpose() * phi;
        gram.diagonal().array() += cfg.ridge;
        Eigen::LDLT<Matrix> ldlt(gram);
        if (singular(ldlt, cfg.ridge))
            throw FitFailure("nvar: singular normal equations");
        w = ldlt.solve(phi.transpose() * y);
    } else {
        // Dual form keeps the solve at samples × samples.
        Matrix kernel = phi * phi.transpose();
        kernel.diagonal().array() += cfg.ridge;
        Eigen::LDLT<Matrix> ldlt(kernel);
        if (singular(ldlt, cfg.ridge))
            throw FitFailure("nvar: singular normal equations");
        w = phi.transpose() * ldlt.solve(y);
    }
    if (!w.allFinite()) throw FitFailure("nvar: non-finite readout weights");
    Vector intercept = (y_mean - phi_mean * w).transpose();
    return NvarModel(cfg, d, std::move(intercept), std::move(w));
}

double nvar_training_residual(const NvarModel& model, const Eigen::Ref<const Matrix>& train) {
    const Index window = model.window();
    double acc = 0.0;
    Index count = 0;
    for (Index t = window - 1; t + 1 < train.rows(); ++t) {
        const Vector next = model.predict_next(train.topRows(t + 1));
        acc += (next - train.row(t + 1).transpose()).squaredNorm();
        ++count;
    }
    return count ? acc / static_cast<double>(count) : 0.0;
}

Rollout nvar_rollout(const NvarModel& model, const Eigen::Ref<const Matrix>& context, Index horizon) {
    if (horizon < 1) throw InvalidArgument("nvar: horizon must be >= 1");
    if (context.cols() != model.channels()) throw InvalidArgument("nvar: channel count mismatch");
    const Index window = model.window();
    if (context.rows() < window) throw InvalidArgument("nvar: context shorter than the lag window");

    const Eigen::RowVectorXd center = context.colwise().mean();
    Eigen::RowVectorXd amp = (context.rowwise() - center).cwiseAbs().colwise().maxCoeff();
    amp = amp.cwiseMax(1e-12);
    const Eigen::RowVectorXd lo = center - 100.0 * amp, hi = center + 100.0 * amp;

    Matrix buffer(window + horizon, model.channels());
    buffer.topRows(window) = context.bottomRows(window);
    Rollout out;
    for (Index h = 0; h < horizon; ++h) {
        Vector next = model.predict_next(buffer.middleRows(h, window));
        for (Index c = 0; c < next.size(); ++c) {
            if (!std::isfinite(next(c))) {
                next(c) = center(c);
                out.diverged = true;
            } else if (next(c) < lo(c) || next(c) > hi(c)) {
                next(c) = std::clamp(next(c), lo(c), hi(c));
                out.diverged = true;
            }
        }
        buffer.row(window + h) = next.transpose();
    }
    out.values = buffer.bottomRows(horizon);
    return out;
}

Forecast nvar_forecast(const NvarModel& model, const ForecastTask& task) {
    task.validate();
    if (model.channels() != 1) throw InvalidArgument("nvar: univariate task needs a single-channel model");
    const auto start = Clock::now();
    const Matrix ctx = task.context;
    Rollout r = nvar_rollout(model, ctx, task.horizon);
    Forecast f;
    f.model_id = "nvar";
    f.values = r.values.col(0);
    f.inference_walltime = seconds_since(start);
    f.metadata["n_lags"] = model.config().n_lags;
    f.metadata["diverged"] = r.diverged;
    return f;
}

std::unique_ptr<Forecaster> NvarForecaster::with_lookback(int lags) const {
    NvarConfig cfg = cfg_;
    cfg.n_lags = lags;
    return std::make_unique<NvarForecaster>(cfg);
}

Forecast NvarForecaster::forecast(const ForecastTask& task) const {
    task.validate();
    const auto start = Clock::now();
    const Matrix ctx = task.context;
    const NvarModel model = nvar_fit(ctx, cfg_);
    const double fit_time = seconds_since(start);
    Forecast f = nvar_forecast(model, task);
    f.fit_walltime = fit_time;
    return f;
}

std::vector<Forecast> NvarForecaster::forecast_joint(const Eigen::Ref<const Matrix>& context, Index horizon,
                                                     double dt_lyap) const {
    if (horizon < 1) throw InvalidArgument("forecast horizon must be >= 1");
    const auto start = Clock::now();
    const NvarModel model = nvar_fit(context, cfg_);
    const double fit_time = seconds_since(start);
    const auto infer_start = Clock::now();
    Rollout r = nvar_rollout(model, context, horizon);
    const double infer_time = seconds_since(infer_start);
    (void)dt_lyap;

    std::vector<Forecast> out;
    for (Index c = 0; c < context.cols(); ++c) {
        Forecast f;
        f.model_id = "nvar";
        f.values = r.values.col(c);
        f.fit_walltime = fit_time;
        f.inference_walltime = infer_time;
        f.metadata["n_lags"] = cfg_.n_lags;
        f.metadata["diverged"] = r.diverged;
        f.metadata["joint"] = true;
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace chaosbench
