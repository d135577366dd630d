#include "chaosbench/forecasters.hpp"

#include <chrono>

namespace chaosbench {

void ForecastTask::validate() const {
    if (context.size() < 2) throw InvalidArgument("forecast task needs at least 2 context points");
    if (horizon < 1) throw InvalidArgument("forecast horizon must be >= 1");
    if (!context.allFinite()) throw InvalidArgument("forecast context contains non-finite values");
}

Forecast naive_forecast(const ForecastTask& task) {
    task.validate();
    Forecast f;
    f.model_id = "naive";
    f.values = Vector::Constant(task.horizon, task.context(task.context.size() - 1));
    return f;
}

std::string to_string(ChannelMode mode) {
    return mode == ChannelMode::multivariate ? "multivariate" : "channel_independent";
}

ChannelMode channel_mode_from_string(const std::string& s) {
    if (s == "channel_independent") return ChannelMode::channel_independent;
    if (s == "multivariate") return ChannelMode::multivariate;
    throw InvalidArgument("unknown channel mode '" + s + "'");
}

std::unique_ptr<Forecaster> Forecaster::with_lookback(int) const {
    throw UnsupportedMode("model '" + id() + "' has no lookback to tune");
}

std::vector<Forecast> Forecaster::forecast_joint(const Eigen::Ref<const Matrix>&, Index, double) const {
    throw UnsupportedMode("model '" + id() + "' is univariate-only");
}

std::vector<Forecast> forecast_multichannel(const Forecaster& model, const Eigen::Ref<const Matrix>& context,
                                            Index horizon, double dt_lyap, ChannelMode mode) {
    if (context.cols() < 1) throw InvalidArgument("trajectory has no channels");
    if (mode == ChannelMode::multivariate) {
        if (!model.supports_multivariate())
            throw UnsupportedMode("model '" + model.id() + "' does not support multivariate mode");
        return model.forecast_joint(context, horizon, dt_lyap);
    }
    std::vector<Forecast> out;
    out.reserve(static_cast<std::size_t>(context.cols()));
    for (Index c = 0; c < context.cols(); ++c) {
        ForecastTask task{context.col(c), horizon, static_cast<int>(c), dt_lyap};
        out.push_back(model.forecast(task));
    }
    return out;
}

}  // namespace chaosbench
