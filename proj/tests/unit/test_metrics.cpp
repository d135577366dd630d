#include "support.hpp"

#include "chaosbench/experiments.hpp"
#include "chaosbench/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace chaosbench;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

Matrix uniform_cloud(Index n, Index d, Seed seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u;
    Matrix m(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = u(rng);
    return m;
}

// Prediction whose per-step sMAPE against truth 1 equals s.
double pred_for_smape(double s) { return (200.0 - s) / (200.0 + s); }

}  // namespace

TEST_CASE("smape worked values") {
    const Vector x = vec({1.5, -2.0, 3.0});
    CHECK(smape_pointwise(x, x) == 0.0);
    CHECK(smape_pointwise(x, (-x).eval()) == 200.0);
    CHECK(smape_pointwise(vec({1, 0, 0}), vec({0, 0, 0})) == doctest::Approx(200.0 / 3.0).epsilon(1e-15));
    CHECK(smape_pointwise(vec({0, 0}), vec({0, 0})) == 0.0);

    Matrix truth(2, 1), pred(2, 1);
    truth << 1, 1;
    pred << 1, -1;
    CHECK(smape_cumulative(truth, pred) == 100.0);
    CHECK(smape_cumulative(truth, truth) == 0.0);
    CHECK_THROWS_AS(smape_cumulative(truth, Matrix(3, 1)), InvalidArgument);
}

TEST_CASE("smape is bounded and symmetric") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 2000; ++trial) {
        Vector a(4), b(4);
        for (Index i = 0; i < 4; ++i) {
            a(i) = g(rng) * std::pow(10.0, g(rng));
            b(i) = trial % 5 == 0 ? 0.0 : g(rng);
        }
        const double s = smape_pointwise(a, b);
        CHECK(s >= 0.0);
        CHECK(s <= 200.0);
        CHECK(s == smape_pointwise(b, a));
    }
}

TEST_CASE("valid prediction time") {
    Matrix truth = Matrix::Ones(4, 1), pred(4, 1);
    pred << pred_for_smape(10), pred_for_smape(20), pred_for_smape(35), pred_for_smape(10);
    CHECK(vpt(truth, pred, 30.0, 1.0 / 30.0) == doctest::Approx(2.0 / 30.0));
    CHECK(vpt(truth, truth, 30.0, 1.0 / 30.0) == doctest::Approx(4.0 / 30.0));

    Matrix flipped = -truth;
    CHECK(vpt(truth, flipped, 30.0, 1.0 / 30.0) == 0.0);
    CHECK_THROWS_AS(vpt(truth, Matrix(3, 1), 30.0, 0.1), InvalidArgument);
    CHECK_THROWS_AS(vpt_from_curve(vec({1.0}), 0.0, 0.1), InvalidArgument);

    // Smaller thresholds never lengthen the valid time.
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 60.0);
    for (int trial = 0; trial < 200; ++trial) {
        Vector curve(50);
        for (Index i = 0; i < 50; ++i) curve(i) = u(rng);
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : {60.0, 40.0, 30.0, 10.0, 1.0}) {
            const double v = vpt_from_curve(curve, eps, 1.0);
            CHECK(v <= prev);
            prev = v;
        }
    }
}

TEST_CASE("spearman") {
    const Vector a = vec({1, 2, 3, 4, 5, 6});
    CHECK(spearman(a, a) == doctest::Approx(1.0));
    CHECK(spearman(a, (-a).eval()) == doctest::Approx(-1.0));
    CHECK(spearman(vec({1, 2, 3}), vec({3, 1, 2})) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(spearman(a, Vector::Constant(6, 2.0)), UndefinedCorrelation);
    CHECK_THROWS_AS(spearman(vec({1, 2}), vec({2, 1})), InvalidArgument);

    const Vector ties = vec({1, 2, 2, 3});
    const Vector r = fractional_ranks(ties);
    CHECK(r(1) == 2.5);
    CHECK(r(2) == 2.5);

    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        Vector x(20), y(20);
        for (Index i = 0; i < 20; ++i) {
            x(i) = g(rng);
            y(i) = x(i) + g(rng);
        }
        const double rho = spearman(x, y);
        const Vector fx = x.array().exp().matrix();
        const Vector fy = y.array().pow(3).matrix();
        CHECK(spearman(fx, fy) == doctest::Approx(rho).epsilon(1e-12));
    }
}

TEST_CASE("context overlap") {
    SUBCASE("repeated halves") {
        Vector half(40);
        for (Index i = 0; i < 40; ++i) half(i) = std::sin(0.3 * static_cast<double>(i * i));
        Vector ctx(80);
        ctx << half, half;
        const auto r = context_overlap(ctx, 30);
        CHECK(r.value == doctest::Approx(1.0));
        CHECK(r.offset == 10);
    }
    SUBCASE("final window orthogonal to every earlier window") {
        // Earlier windows live in span{1, t} plus one fixed wiggle; the final
        // window is orthogonal to all of them after centering.
        const Index m = 30;
        Vector early(60), last(m);
        for (Index i = 0; i < 60; ++i) early(i) = 0.1 * static_cast<double>(i);
        for (Index i = 0; i < m; ++i) {
            const double t = static_cast<double>(i) - 14.5;
            last(i) = 3.0 * t * t - 224.75;  // centered, even about the middle
        }
        Vector ctx(60 + m);
        ctx << early, last;
        const auto r = context_overlap(ctx, static_cast<int>(m));
        CHECK(r.value <= 1e-12);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(context_overlap(Vector::Zero(100), 30), UndefinedSimilarity);
        CHECK_THROWS_AS(context_overlap(Vector::Ones(50), 30), InvalidArgument);
    }
    SUBCASE("any-length mode is at least the fixed-length value") {
        std::mt19937_64 rng(2);
        std::normal_distribution<double> g;
        Vector ctx(160);
        for (Index i = 0; i < 160; ++i) ctx(i) = g(rng);
        const auto fixed = context_overlap(ctx, 30);
        const auto any = context_overlap_any_length(ctx, 30);
        CHECK(any.value >= fixed.value);
        CHECK(any.length >= 30);
        CHECK(2 * any.length <= 160);
        CHECK(context_overlap(ctx, static_cast<int>(any.length)).value == any.value);
    }
}

TEST_CASE("correlation dimension on sets of known dimension") {
    const MetricConfig cfg;
    SUBCASE("line") {
        Matrix pts(2000, 3);
        const Matrix u = uniform_cloud(2000, 1, 1);
        for (Index i = 0; i < 2000; ++i) pts.row(i) = u(i, 0) * Eigen::RowVector3d(1.0, 2.0, -0.5);
        CHECK(std::abs(correlation_dimension(pts, cfg) - 1.0) < 0.1);
    }
    SUBCASE("plane") {
        const Matrix u = uniform_cloud(2000, 2, 2);
        Matrix pts(2000, 3);
        pts.col(0) = u.col(0);
        pts.col(1) = u.col(1);
        pts.col(2) = 0.3 * u.col(0) - 0.2 * u.col(1);
        CHECK(std::abs(correlation_dimension(pts, cfg) - 2.0) < 0.15);
    }
    SUBCASE("rotation and scale invariance") {
        const Matrix u = uniform_cloud(1500, 3, 3);
        Matrix pts = u;
        pts.col(2) *= 0.01;
        const double base = correlation_dimension(pts, cfg);
        const Eigen::Matrix3d rot =
            (Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized())).toRotationMatrix();
        const Matrix turned = 4.5 * pts * rot.transpose();
        CHECK(std::abs(correlation_dimension(turned, cfg) - base) < 0.02);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(correlation_dimension(Matrix::Ones(200, 3), cfg), DegenerateGeometry);
        CHECK_THROWS_AS(correlation_dimension(uniform_cloud(49, 3, 1), cfg), InvalidArgument);
    }
}

TEST_CASE("d_frac error") {
    const MetricConfig cfg;
    Matrix line(2000, 3);
    const Matrix u = uniform_cloud(2000, 1, 7);
    for (Index i = 0; i < 2000; ++i) line.row(i) = u(i, 0) * Eigen::RowVector3d(1.0, 0.0, 0.0);
    const double est = correlation_dimension(line, cfg);
    CHECK(d_frac_error({line}, est, cfg) == doctest::Approx(0.0));
    CHECK(d_frac_error({line, line}, est + 0.06, cfg) == doctest::Approx(0.06));
    const double ref = testing::registry().get("lorenz").reference_fractal_dim;
    CHECK(d_frac_error({Matrix::Constant(300, 3, 1.0)}, ref, cfg) == doctest::Approx(ref));
    CHECK_THROWS_AS(d_frac_error({}, 2.0, cfg), InvalidArgument);
}

TEST_CASE("attractor KL divergence") {
    const auto& lorenz = testing::registry().get("lorenz");
    const Trajectory t = generate_trajectory(lorenz, lorenz.initial_state, 300, 30);
    MetricConfig cfg;
    cfg.rng_seed = 17;

    SUBCASE("self divergence vanishes") {
        const auto k = kl_attractor(t.values, t.values, cfg);
        CHECK(std::abs(k.value) <= 3.0 * k.standard_error);
    }
    SUBCASE("reproducible") {
        const Matrix other = t.values.array() + 0.5;
        const auto a = kl_attractor(t.values, other, cfg);
        const auto b = kl_attractor(t.values, other, cfg);
        CHECK(a.value == b.value);
        CHECK(a.standard_error == b.standard_error);
        cfg.rng_seed = 18;
        CHECK(kl_attractor(t.values, other, cfg).value != a.value);
    }
    SUBCASE("disjoint support") {
        const Matrix toy = t.values.topRows(100);
        const double extent = trajectory_extent(toy);
        const Matrix far = toy.array() + 10.0 * extent;
        const auto k = kl_attractor(toy, far, cfg);
        CHECK(k.value > 10.0);

        // Exact mixture densities, averaged over the same samples.
        const double floor = cfg.kl_bandwidth_floor * extent;
        const auto p = mixture_from_trajectory(toy, floor);
        const auto q = mixture_from_trajectory(far, floor);
        std::mt19937_64 rng(cfg.rng_seed);
        double direct = 0.0;
        for (int i = 0; i < cfg.kl_mc_samples; ++i) {
            const Vector x = p.sample(rng);
            double lp = 0.0, lq = 0.0;
            for (Index c = 0; c < p.components(); ++c) {
                lp += std::exp(-(x - p.means().col(c)).squaredNorm() / (2 * p.sigmas()(c) * p.sigmas()(c))) /
                      std::pow(2 * M_PI * p.sigmas()(c) * p.sigmas()(c), 1.5);
            }
            // q's density underflows in linear space; use its nearest component bound.
            double best = -std::numeric_limits<double>::infinity();
            for (Index c = 0; c < q.components(); ++c) {
                const double s = q.sigmas()(c);
                const double term = -(x - q.means().col(c)).squaredNorm() / (2 * s * s) - 1.5 * std::log(2 * M_PI * s * s);
                best = std::max(best, term);
            }
            lq = best - std::log(static_cast<double>(q.components()));
            direct += std::log(lp / static_cast<double>(p.components())) - lq;
        }
        direct /= cfg.kl_mc_samples;
        // log-sum-exp is at least the max term, so the estimate sits at or below the bound.
        CHECK(k.value <= direct + 1e-9);
        CHECK(k.value > direct - std::log(static_cast<double>(q.components())) - 1e-9);
    }
    SUBCASE("shape errors") {
        CHECK_THROWS_AS(kl_attractor(t.values, t.values.leftCols(2), cfg), InvalidArgument);
        CHECK_THROWS_AS(kl_attractor(t.values.topRows(1), t.values, cfg), InvalidArgument);
    }
}

TEST_CASE("mixture bandwidth rule") {
    Matrix traj(4, 1);
    traj << 0.0, 1.0, 1.0, 4.0;
    const auto m = mixture_from_trajectory(traj, 1e-6);
    CHECK(m.sigmas()(0) == 1.0);
    CHECK(m.sigmas()(1) == 1.0);
    CHECK(m.sigmas()(2) == 1e-6);
    CHECK(m.sigmas()(3) == 3.0);
    CHECK_THROWS_AS(mixture_from_trajectory(traj, 0.0), NumericFailure);
}

TEST_CASE("natural measure density") {
    SUBCASE("cluster beats outlier") {
        Matrix pts(41, 2);
        std::mt19937_64 rng(3);
        std::normal_distribution<double> g(0.0, 0.05);
        for (Index i = 0; i < 40; ++i) pts.row(i) << g(rng), g(rng);
        pts.row(40) << 5.0, 5.0;
        CHECK(natural_measure_density(pts, Vector::Zero(2)) > natural_measure_density(pts, vec({5.0, 5.0})));
    }
    SUBCASE("uniform grid walked in a snake has flat interior density") {
        const Index n = 30;
        Matrix pts(n * n, 2);
        Index k = 0;
        for (Index r = 0; r < n; ++r)
            for (Index c = 0; c < n; ++c) pts.row(k++) << static_cast<double>(r % 2 ? n - 1 - c : c), static_cast<double>(r);
        std::vector<double> dens;
        for (Index r = 8; r < n - 8; r += 2)
            for (Index c = 8; c < n - 8; c += 3)
                dens.push_back(natural_measure_density(pts, vec({c + 0.25, r + 0.5})));
        const double mean = std::accumulate(dens.begin(), dens.end(), 0.0) / static_cast<double>(dens.size());
        double var = 0.0;
        for (double d : dens) var += (d - mean) * (d - mean);
        const double cv = std::sqrt(var / static_cast<double>(dens.size())) / mean;
        CHECK(cv < 0.10);
    }
    SUBCASE("far queries vanish") {
        const Matrix pts = uniform_cloud(200, 3, 9);
        const double inside = natural_measure_density(pts, vec({0.5, 0.5, 0.5}));
        const double far = natural_measure_density(pts, vec({100.0, 100.0, 100.0}));
        CHECK(far < 1e-30 * inside);
    }
}

TEST_CASE("metric config validation") {
    MetricConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.vpt_epsilon = 250.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.gp_low_percentile = 60.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.kl_mc_samples = 50;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}
