#pragma once

#include "chaosbench/errors.hpp"
#include "chaosbench/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

namespace chaosbench {

struct MetricConfig {
    double vpt_epsilon = 30.0;
    // Fit window of the correlation sum, as percentiles of pairwise distances.
    double gp_low_percentile = 0.5;
    double gp_high_percentile = 5.0;
    int gp_radii = 20;
    Index gp_min_points = 1000;
    Index gp_hard_min_points = 50;
    Index gp_max_pairs = 4'000'000;
    int kl_mc_samples = 10000;
    double kl_bandwidth_floor = 1e-12;  // relative to attractor extent
    int overlap_min_len = 30;
    // false: windows of exactly overlap_min_len; true: best over every length
    // from overlap_min_len up to C/2.
    bool overlap_max_length = false;
    Seed rng_seed = 0;

    void validate() const;
};

struct MetricReport {
    Vector smape_curve;
    double vpt_lyap = 0.0;
    std::optional<double> d_frac_pred;
    std::optional<double> d_frac_error;
    std::optional<double> d_stsp;
    std::optional<double> d_stsp_se;
    std::optional<double> context_overlap;
};

// ---------------------------------------------------------------------------
// Pointwise error

/// 200 · mean_i |x_i − x̂_i| / (|x_i| + |x̂_i|); components with x_i = x̂_i = 0
/// contribute nothing. Works on any pair of equally sized vector expressions.
template <typename DerivedA, typename DerivedB>
double smape_pointwise(const Eigen::MatrixBase<DerivedA>& truth,
                       const Eigen::MatrixBase<DerivedB>& pred) {
    if (truth.size() != pred.size() || truth.size() == 0)
        throw InvalidArgument("smape: truth and prediction differ in size");
    double acc = 0.0;
    for (Index i = 0; i < truth.size(); ++i) {
        const double x = truth.derived().coeff(i), y = pred.derived().coeff(i);
        const double den = std::abs(x) + std::abs(y);
        if (den > 0.0) acc += std::abs(x - y) / den;
    }
    return 200.0 * acc / static_cast<double>(truth.size());
}

// Per-horizon sMAPE of an H×D forecast.
template <typename DerivedA, typename DerivedB>
Vector smape_curve(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& pred) {
    if (truth.rows() != pred.rows() || truth.cols() != pred.cols())
        throw InvalidArgument("smape: shape mismatch");
    Vector curve(truth.rows());
    for (Index t = 0; t < truth.rows(); ++t) curve(t) = smape_pointwise(truth.row(t), pred.row(t));
    return curve;
}

template <typename DerivedA, typename DerivedB>
double smape_cumulative(const Eigen::MatrixBase<DerivedA>& truth,
                        const Eigen::MatrixBase<DerivedB>& pred) {
    if (truth.rows() == 0) throw InvalidArgument("smape: empty horizon");
    return smape_curve(truth, pred).mean();
}

/// Valid prediction time from a per-horizon sMAPE curve: the number of leading
/// steps with sMAPE < ε, times dt_lyap.
inline double vpt_from_curve(const Eigen::Ref<const Vector>& curve, double epsilon, double dt_lyap) {
    if (!(epsilon > 0.0)) throw InvalidArgument("vpt: epsilon must be positive");
    Index valid = 0;
    while (valid < curve.size() && curve(valid) < epsilon) ++valid;
    return static_cast<double>(valid) * dt_lyap;
}

template <typename DerivedA, typename DerivedB>
double vpt(const Eigen::MatrixBase<DerivedA>& truth, const Eigen::MatrixBase<DerivedB>& pred,
           double epsilon, double dt_lyap) {
    return vpt_from_curve(smape_curve(truth, pred), epsilon, dt_lyap);
}

// ---------------------------------------------------------------------------
// Correlation

// Pearson correlation; nullopt when either side has zero variance.
template <typename DerivedA, typename DerivedB>
std::optional<double> pearson(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("pearson: size mismatch");
    const double ma = a.mean(), mb = b.mean();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (Index i = 0; i < a.size(); ++i) {
        const double da = a.derived().coeff(i) - ma, db = b.derived().coeff(i) - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return sab / std::sqrt(saa * sbb);
}

// Fractional (average-of-ties) ranks, 1-based.
Vector fractional_ranks(const Eigen::Ref<const Vector>& values);

double spearman(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

struct OverlapResult {
    double value = 0.0;
    Index offset = 0;  // start of the best-matching earlier window
    Index length = 0;
};

/// Maximum Pearson correlation between the final `min_len` points and any
/// earlier, non-overlapping window of the same length.
OverlapResult context_overlap(const Eigen::Ref<const Vector>& context, int min_len = 30);

// Same, maximized over window lengths min_len..C/2 (shorter length on ties).
OverlapResult context_overlap_any_length(const Eigen::Ref<const Vector>& context, int min_len = 30);

// ---------------------------------------------------------------------------
// Attractor geometry

/// Grassberger–Procaccia correlation dimension of an N×D point cloud.
double correlation_dimension(const Eigen::Ref<const Matrix>& points, const MetricConfig& cfg = {});

/// RMSE of per-cloud correlation dimension against a reference; clouds with
/// degenerate geometry count as dimension 0.
double d_frac_error(const std::vector<Matrix>& clouds, double reference_fractal_dim,
                    const MetricConfig& cfg = {});

/// Equal-weight isotropic Gaussian mixture.
class GaussianMixture {
public:
    GaussianMixture(Matrix means, Vector sigmas);

    Index components() const noexcept { return means_.cols(); }
    Index dim() const noexcept { return means_.rows(); }
    const Matrix& means() const noexcept { return means_; }  // D×K
    const Vector& sigmas() const noexcept { return sigmas_; }

    double log_density(const Eigen::Ref<const Vector>& x) const;
    double density(const Eigen::Ref<const Vector>& x) const { return std::exp(log_density(x)); }
    Vector sample(std::mt19937_64& rng) const;

private:
    Matrix means_;
    Vector sigmas_;
    Vector inv_two_var_;
    Vector log_norm_;
};

/// Mixture over a T×D trajectory with σ_t = ‖x_t − x_{t−1}‖, σ_1 = σ_2, and
/// every σ floored at `floor`.
GaussianMixture mixture_from_trajectory(const Eigen::Ref<const Matrix>& traj, double floor);

// Largest per-axis range; 1 for a single repeated point.
double trajectory_extent(const Eigen::Ref<const Matrix>& traj);

struct KlEstimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Monte Carlo KL(p‖q) from n samples of p.
KlEstimate kl_monte_carlo(const GaussianMixture& p, const GaussianMixture& q, int n, Seed seed);

/// State-space divergence between a true and a predicted trajectory.
KlEstimate kl_attractor(const Eigen::Ref<const Matrix>& true_traj,
                        const Eigen::Ref<const Matrix>& pred_traj, const MetricConfig& cfg = {});

double natural_measure_density(const Eigen::Ref<const Matrix>& attractor_points,
                               const Eigen::Ref<const Vector>& query, const MetricConfig& cfg = {});

}  // namespace chaosbench
