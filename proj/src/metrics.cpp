#include "chaosbench/metrics.hpp"

#include <numeric>

namespace chaosbench {

void MetricConfig::validate() const {
    if (!(vpt_epsilon > 0.0 && vpt_epsilon < 200.0))
        throw InvalidArgument("vpt_epsilon must lie in (0, 200)");
    if (!(gp_low_percentile >= 0.0 && gp_low_percentile < gp_high_percentile &&
          gp_high_percentile <= 100.0))
        throw InvalidArgument("correlation-dimension percentiles must satisfy low < high");
    if (gp_radii < 2) throw InvalidArgument("need at least two radii");
    if (kl_mc_samples < 100) throw InvalidArgument("kl_mc_samples must be >= 100");
    if (!(kl_bandwidth_floor >= 0.0)) throw InvalidArgument("kl_bandwidth_floor must be >= 0");
    if (overlap_min_len < 2) throw InvalidArgument("overlap_min_len must be >= 2");
}

Vector fractional_ranks(const Eigen::Ref<const Vector>& values) {
    const Index n = values.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return values(a) < values(b); });
    Vector ranks(n);
    Index i = 0;
    while (i < n) {
        Index j = i;
        while (j + 1 < n && values(order[j + 1]) == values(order[i])) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index k = i; k <= j; ++k) ranks(order[k]) = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
    if (a.size() != b.size()) throw InvalidArgument("spearman: length mismatch");
    if (a.size() < 3) throw InvalidArgument("spearman: need at least 3 observations");
    const Vector ra = fractional_ranks(a), rb = fractional_ranks(b);
    auto rho = pearson(ra, rb);
    if (!rho) throw UndefinedCorrelation("spearman: zero rank variance");
    return std::clamp(*rho, -1.0, 1.0);
}

OverlapResult context_overlap(const Eigen::Ref<const Vector>& context, int min_len) {
    const Index m = min_len;
    const Index c = context.size();
    if (m < 2) throw InvalidArgument("context_overlap: window must have at least 2 points");
    if (c < 2 * m) throw InvalidArgument("context_overlap: context shorter than two windows");

    const auto query = context.tail(m);
    const double qmean = query.mean();
    const Vector qc = query.array() - qmean;
    const double qnorm = qc.norm();
    if (!(qnorm > 0.0)) throw UndefinedSimilarity("context_overlap: final window has zero variance");

    OverlapResult best{-std::numeric_limits<double>::infinity(), -1, m};
    for (Index j = 0; j + 2 * m <= c; ++j) {
        const auto w = context.segment(j, m);
        const double wmean = w.mean();
        double dot = 0.0, wss = 0.0;
        for (Index i = 0; i < m; ++i) {
            const double dw = w(i) - wmean;
            dot += dw * qc(i);
            wss += dw * dw;
        }
        if (!(wss > 0.0)) continue;
        const double r = dot / (std::sqrt(wss) * qnorm);
        if (r > best.value) best = {r, j, m};
    }
    if (best.offset < 0) throw UndefinedSimilarity("context_overlap: every earlier window is constant");
    best.value = std::clamp(best.value, -1.0, 1.0);
    return best;
}

OverlapResult context_overlap_any_length(const Eigen::Ref<const Vector>& context, int min_len) {
    OverlapResult best = context_overlap(context, min_len);
    for (Index m = min_len + 1; 2 * m <= context.size(); ++m) {
        OverlapResult r;
        try {
            r = context_overlap(context, static_cast<int>(m));
        } catch (const UndefinedSimilarity&) {
            continue;
        }
        if (r.value > best.value) best = r;
    }
    return best;
}

}  // namespace chaosbench
