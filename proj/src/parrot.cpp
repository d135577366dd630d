#include "chaosbench/forecasters.hpp"
#include "chaosbench/metrics.hpp"

#include <chrono>
#include <cmath>

namespace chaosbench {

namespace {

struct Match {
    Index offset = -1;
    double score = -std::numeric_limits<double>::infinity();
};

// Best window context[j, j+m) for j in [0, C−m−1]; the final window itself is
// never a candidate so at least one continuation point exists.
Match best_match(const Eigen::Ref<const Vector>& context, const Eigen::Ref<const Vector>& query,
                 Similarity kind) {
    const Index m = query.size();
    Match best;
    for (Index j = 0; j + m < context.size(); ++j) {
        const auto score = window_similarity(query, context.segment(j, m), kind);
        if (score && *score > best.score) best = {j, *score};
    }
    return best;
}

}  // namespace

void ParrotConfig::validate() const {
    if (motif_len < 2) throw InvalidArgument("parrot: motif_len must be >= 2");
    if (rematch_interval < 0) throw InvalidArgument("parrot: rematch_interval must be >= 0");
}

std::optional<double> window_similarity(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                        Similarity kind) {
    if (kind == Similarity::pearson) return pearson(a, b);
    const double na = a.norm(), nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) return std::nullopt;
    return a.dot(b) / (na * nb);
}

double parrot_null_threshold(Index candidates, Index motif_len) {
    if (motif_len <= 3) return 1.0;
    const double n = std::max<double>(3.0, static_cast<double>(candidates));
    const double a = std::sqrt(2.0 * std::log(n));
    const double b = a - (std::log(std::log(n)) + std::log(4.0 * M_PI)) / (2.0 * a);
    const double z = (b - std::log(-std::log(0.99)) / a) / std::sqrt(static_cast<double>(motif_len) - 3.0);
    return std::tanh(z);
}

Forecast parrot_forecast(const ForecastTask& task, const ParrotConfig& cfg) {
    task.validate();
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Index m = cfg.motif_len;
    const Index c = task.context.size();
    if (c < 2 * m) throw InvalidArgument("parrot: context must hold at least two motifs");

    const Index h = task.horizon;
    const Index interval = cfg.rematch_interval > 0 ? cfg.rematch_interval : h;

    // Context followed by emitted values; queries are its trailing m points.
    Vector series(c + h);
    series.head(c) = task.context;

    Forecast f;
    f.model_id = "parrot";
    nlohmann::json offsets = nlohmann::json::array(), scores = nlohmann::json::array();

    Match first = best_match(task.context, task.context.tail(m), cfg.similarity);
    if (first.offset < 0) {
        Forecast naive = naive_forecast(task);
        naive.model_id = "parrot";
        naive.metadata = {{"fallback", true}, {"low_confidence", true}, {"offsets", offsets},
                          {"scores", scores}, {"motif_len", m}};
        naive.inference_walltime =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return naive;
    }

    Match current = first;
    Index cursor = current.offset + m;
    Index since_match = 0;
    offsets.push_back(current.offset);
    scores.push_back(current.score);
    for (Index k = 0; k < h; ++k) {
        if (cursor >= c || since_match >= interval) {
            const Match next = best_match(task.context, series.segment(c + k - m, m), cfg.similarity);
            if (next.offset < 0) {
                // Constant emitted motif: keep replaying linearly from the start of the match.
                cursor = std::min(cursor, c - 1);
            } else {
                current = next;
                cursor = current.offset + m;
                offsets.push_back(current.offset);
                scores.push_back(current.score);
            }
            since_match = 0;
        }
        series(c + k) = task.context(cursor);
        ++cursor;
        ++since_match;
    }

    f.values = series.tail(h);
    const double threshold = parrot_null_threshold(c - m, m);
    f.metadata = {{"fallback", false},
                  {"offsets", offsets},
                  {"scores", scores},
                  {"motif_len", m},
                  {"null_threshold", threshold},
                  {"low_confidence", cfg.similarity == Similarity::pearson && first.score < threshold}};
    f.inference_walltime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return f;
}

Forecast ParrotForecaster::forecast(const ForecastTask& task) const {
    task.validate();
    const Index c = task.context.size();
    if (c < 4) {
        Forecast f = naive_forecast(task);
        f.model_id = "parrot";
        f.metadata = {{"fallback", true}, {"low_confidence", true}, {"motif_len", 0}};
        return f;
    }
    ParrotConfig cfg = cfg_;
    cfg.motif_len = static_cast<int>(std::min<Index>(cfg.motif_len, c / 2));
    return parrot_forecast(task, cfg);
}

}  // namespace chaosbench
