#include "chaosbench/metrics.hpp"

#include <numeric>

namespace chaosbench {

namespace {

// Linear-interpolated percentile of sorted data (numpy's default rule).
double percentile_sorted(const std::vector<double>& sorted, double pct) {
    if (sorted.empty()) return 0.0;
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

double correlation_dimension(const Eigen::Ref<const Matrix>& points, const MetricConfig& cfg) {
    cfg.validate();
    const Index n = points.rows();
    if (n < cfg.gp_hard_min_points)
        throw InvalidArgument("correlation_dimension: need at least " +
                              std::to_string(cfg.gp_hard_min_points) + " points");

    const auto all_pairs = static_cast<std::int64_t>(n) * (n - 1) / 2;
    std::vector<double> dist;
    if (all_pairs <= cfg.gp_max_pairs) {
        dist.reserve(static_cast<std::size_t>(all_pairs));
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) dist.push_back((points.row(i) - points.row(j)).norm());
    } else {
        std::mt19937_64 rng(cfg.rng_seed);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        dist.reserve(static_cast<std::size_t>(cfg.gp_max_pairs));
        while (static_cast<Index>(dist.size()) < cfg.gp_max_pairs) {
            const Index i = pick(rng), j = pick(rng);
            if (i != j) dist.push_back((points.row(i) - points.row(j)).norm());
        }
    }
    std::sort(dist.begin(), dist.end());

    const auto first_positive = std::upper_bound(dist.begin(), dist.end(), 0.0);
    if (first_positive == dist.end())
        throw DegenerateGeometry("correlation_dimension: all points coincide");
    const std::vector<double> positive(first_positive, dist.end());
    const double r_lo = percentile_sorted(positive, cfg.gp_low_percentile);
    const double r_hi = percentile_sorted(positive, cfg.gp_high_percentile);
    if (!(r_hi > r_lo) || !(r_lo > 0.0))
        throw DegenerateGeometry("correlation_dimension: empty scaling window");

    const double total = static_cast<double>(dist.size());
    std::vector<double> xs, ys;
    for (int k = 0; k < cfg.gp_radii; ++k) {
        const double r =
            r_lo * std::pow(r_hi / r_lo, static_cast<double>(k) / static_cast<double>(cfg.gp_radii - 1));
        const auto count = std::lower_bound(dist.begin(), dist.end(), r) - dist.begin();
        if (count == 0) continue;
        xs.push_back(std::log(r));
        ys.push_back(std::log(static_cast<double>(count) / total));
    }
    if (xs.size() < 2) throw DegenerateGeometry("correlation_dimension: too few populated radii");

    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    return sxy / sxx;
}

double d_frac_error(const std::vector<Matrix>& clouds, double reference_fractal_dim,
                    const MetricConfig& cfg) {
    if (clouds.empty()) throw InvalidArgument("d_frac_error: no forecasts");
    double sq = 0.0;
    for (const auto& cloud : clouds) {
        double estimate = 0.0;
        try {
            estimate = correlation_dimension(cloud, cfg);
        } catch (const DegenerateGeometry&) {
            estimate = 0.0;
        }
        sq += (estimate - reference_fractal_dim) * (estimate - reference_fractal_dim);
    }
    return std::sqrt(sq / static_cast<double>(clouds.size()));
}

// ---------------------------------------------------------------------------

GaussianMixture::GaussianMixture(Matrix means, Vector sigmas)
    : means_(std::move(means)), sigmas_(std::move(sigmas)) {
    if (means_.cols() != sigmas_.size() || means_.cols() == 0)
        throw InvalidArgument("mixture: one sigma per component required");
    if ((sigmas_.array() <= 0.0).any()) throw NumericFailure("mixture: non-positive bandwidth");
    const double d = static_cast<double>(means_.rows());
    inv_two_var_ = (2.0 * sigmas_.array().square()).inverse();
    log_norm_ = -d * sigmas_.array().log() - 0.5 * d * std::log(2.0 * M_PI) -
                std::log(static_cast<double>(sigmas_.size()));
}

double GaussianMixture::log_density(const Eigen::Ref<const Vector>& x) const {
    const Vector d2 = (means_.colwise() - x).colwise().squaredNorm().transpose();
    const Vector terms = log_norm_.array() - d2.array() * inv_two_var_.array();
    return log_sum_exp(terms);
}

Vector GaussianMixture::sample(std::mt19937_64& rng) const {
    std::uniform_int_distribution<Index> pick(0, components() - 1);
    std::normal_distribution<double> gauss;
    const Index k = pick(rng);
    Vector x = means_.col(k);
    for (Index i = 0; i < x.size(); ++i) x(i) += sigmas_(k) * gauss(rng);
    return x;
}

double trajectory_extent(const Eigen::Ref<const Matrix>& traj) {
    const double e = (traj.colwise().maxCoeff() - traj.colwise().minCoeff()).maxCoeff();
    return e > 0.0 ? e : 1.0;
}

GaussianMixture mixture_from_trajectory(const Eigen::Ref<const Matrix>& traj, double floor) {
    const Index t = traj.rows();
    if (t < 2) throw InvalidArgument("mixture: trajectory needs at least 2 points");
    Vector sig(t);
    for (Index i = 1; i < t; ++i) sig(i) = (traj.row(i) - traj.row(i - 1)).norm();
    sig(0) = sig(1);
    sig = sig.cwiseMax(floor);
    if (!(floor > 0.0) && (sig.array() <= 0.0).any())
        throw NumericFailure("mixture: zero bandwidth with no floor configured");
    return GaussianMixture(traj.transpose(), sig);
}

KlEstimate kl_monte_carlo(const GaussianMixture& p, const GaussianMixture& q, int n, Seed seed) {
    if (p.dim() != q.dim()) throw InvalidArgument("kl: dimension mismatch");
    if (n < 2) throw InvalidArgument("kl: need at least two samples");
    std::mt19937_64 rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const Vector x = p.sample(rng);
        const double r = p.log_density(x) - q.log_density(x);
        if (!std::isfinite(r)) throw NumericFailure("kl: non-finite log density ratio");
        sum += r;
        sum_sq += r * r;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
    return {mean, std::sqrt(var / n)};
}

KlEstimate kl_attractor(const Eigen::Ref<const Matrix>& true_traj, const Eigen::Ref<const Matrix>& pred_traj,
                        const MetricConfig& cfg) {
    cfg.validate();
    if (true_traj.rows() < 2 || pred_traj.rows() < 2)
        throw InvalidArgument("kl_attractor: trajectories need at least 2 points");
    if (true_traj.cols() != pred_traj.cols()) throw InvalidArgument("kl_attractor: dimension mismatch");
    const double floor = cfg.kl_bandwidth_floor * trajectory_extent(true_traj);
    const auto p = mixture_from_trajectory(true_traj, floor);
    const auto q = mixture_from_trajectory(pred_traj, floor);
    return kl_monte_carlo(p, q, cfg.kl_mc_samples, cfg.rng_seed);
}

double natural_measure_density(const Eigen::Ref<const Matrix>& attractor_points,
                               const Eigen::Ref<const Vector>& query, const MetricConfig& cfg) {
    if (attractor_points.rows() < 2) throw InvalidArgument("density: need at least 2 points");
    if (query.size() != attractor_points.cols()) throw InvalidArgument("density: dimension mismatch");
    const double floor = cfg.kl_bandwidth_floor * trajectory_extent(attractor_points);
    return mixture_from_trajectory(attractor_points, floor).density(query);
}

}  // namespace chaosbench
