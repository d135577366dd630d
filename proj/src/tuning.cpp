#include "chaosbench/forecasters.hpp"
#include "chaosbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace chaosbench {

std::vector<double> default_lookback_grid() { return {0.067, 0.167, 0.333, 0.5, 0.833, 1.0}; }

int lookback_to_lags(double lookback_lyap, int points_per_lyapunov) {
    if (!(lookback_lyap > 0.0)) throw InvalidArgument("lookback must be positive");
    return std::max(1, static_cast<int>(std::lround(lookback_lyap * points_per_lyapunov)));
}

TuneResult tune_lookback(const Forecaster& model, const std::vector<Matrix>& trajectories, Index train_len,
                         Index val_len, const std::vector<double>& grid, int points_per_lyapunov,
                         ChannelMode mode, double dt_lyap) {
    if (grid.empty()) throw InvalidArgument("tune_lookback: empty grid");
    if (trajectories.empty()) throw InvalidArgument("tune_lookback: no trajectories");
    if (train_len < 2 || val_len < 1) throw InvalidArgument("tune_lookback: invalid split");
    for (const auto& t : trajectories)
        if (t.rows() < train_len + val_len) throw InvalidArgument("tune_lookback: trajectory shorter than split");

    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());

    TuneResult result;
    double best = std::numeric_limits<double>::infinity();
    for (double value : sorted) {
        TuneRow row;
        row.lookback_lyap = value;
        row.lags = lookback_to_lags(value, points_per_lyapunov);
        try {
            const auto candidate = model.with_lookback(row.lags);
            double total = 0.0;
            for (const auto& traj : trajectories) {
                const auto forecasts = forecast_multichannel(*candidate, traj.topRows(train_len), val_len,
                                                             dt_lyap, mode);
                Matrix pred(val_len, traj.cols());
                for (std::size_t c = 0; c < forecasts.size(); ++c)
                    pred.col(static_cast<Index>(c)) = forecasts[c].values;
                total += smape_cumulative(traj.middleRows(train_len, val_len), pred);
            }
            row.score = total / static_cast<double>(trajectories.size());
            if (!std::isfinite(row.score)) row.score = std::numeric_limits<double>::infinity();
        } catch (const Error& e) {
            row.score = std::numeric_limits<double>::infinity();
            row.failure = e.what();
        }
        // Strict comparison keeps the smaller lookback on ties.
        if (result.table.empty() || row.score < best) {
            best = row.score;
            result.best_lookback_lyap = value;
            result.best_lags = row.lags;
        }
        result.table.push_back(row);
    }
    return result;
}

}  // namespace chaosbench
