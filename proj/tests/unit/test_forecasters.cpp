#include "support.hpp"

#include "chaosbench/experiments.hpp"
#include "chaosbench/forecasters.hpp"
#include "chaosbench/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace chaosbench;

namespace {

ForecastTask make_task(Vector context, Index horizon) {
    ForecastTask t;
    t.context = std::move(context);
    t.horizon = horizon;
    return t;
}

Vector logistic_orbit(Index n, double x0) {
    Vector x(n);
    x(0) = x0;
    for (Index t = 1; t < n; ++t) x(t) = 3.9 * x(t - 1) * (1.0 - x(t - 1));
    return x;
}

Vector noise(Index n, Seed seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
}

// Reference scan for the parrot's best first match.
std::pair<Index, double> brute_best_match(const Vector& ctx, Index m) {
    const Vector q = ctx.tail(m);
    Index best_j = -1;
    double best = -2.0;
    for (Index j = 0; j + m < ctx.size(); ++j) {
        const Vector w = ctx.segment(j, m);
        const double qm = q.mean(), wm = w.mean();
        double sqw = 0, sqq = 0, sww = 0;
        for (Index i = 0; i < m; ++i) {
            sqw += (q(i) - qm) * (w(i) - wm);
            sqq += (q(i) - qm) * (q(i) - qm);
            sww += (w(i) - wm) * (w(i) - wm);
        }
        if (sww == 0.0) continue;
        const double r = sqw / std::sqrt(sqq * sww);
        if (r > best) {
            best = r;
            best_j = j;
        }
    }
    return {best_j, best};
}

}  // namespace

TEST_CASE("naive forecast carries the last value") {
    Vector ctx(4);
    ctx << 1.0, -2.0, 3.5, 5.0;
    const Forecast f = naive_forecast(make_task(ctx, 3));
    REQUIRE(f.values.size() == 3);
    CHECK((f.values.array() == 5.0).all());

    const Vector flat = Vector::Constant(10, 2.5);
    const Forecast g = naive_forecast(make_task(flat, 20));
    CHECK(smape_cumulative(Vector::Constant(20, 2.5), g.values) == 0.0);

    CHECK_THROWS_AS(naive_forecast(make_task(ctx, 0)), InvalidArgument);
    CHECK_THROWS_AS(naive_forecast(make_task(Vector::Constant(1, 1.0), 3)), InvalidArgument);
    Vector bad = ctx;
    bad(1) = std::nan("");
    CHECK_THROWS_AS(naive_forecast(make_task(bad, 3)), InvalidArgument);
}

TEST_CASE("nvar on a linear ramp is exact") {
    Vector ramp(50);
    for (Index t = 0; t < 50; ++t) ramp(t) = 0.75 * static_cast<double>(t) - 3.0;
    NvarConfig cfg;
    cfg.max_order = 1;
    cfg.n_lags = 2;
    cfg.ridge = 1e-12;  // the default penalty shrinks the slope by ~1e-8
    const NvarModel model = nvar_fit(ramp, cfg);
    CHECK(nvar_training_residual(model, ramp) < 1e-16);
    const Forecast f = nvar_forecast(model, make_task(ramp, 5));
    for (Index h = 0; h < 5; ++h) CHECK(std::abs(f.values(h) - (0.75 * static_cast<double>(50 + h) - 3.0)) < 1e-8);
}

TEST_CASE("nvar recovers the logistic map") {
    const Vector x = logistic_orbit(1000, 0.2);
    NvarConfig cfg;
    cfg.n_lags = 1;
    cfg.max_order = 2;
    CHECK(nvar_training_residual(nvar_fit(x, cfg), x) < 1e-6);

    // The map stretches errors by ~e^0.5 per step, so a 20-step rollout needs
    // the readout to be exact well below the default ridge's bias.
    cfg.ridge = 1e-12;
    const NvarModel model = nvar_fit(x, cfg);
    const Vector ctx = x.head(600);
    const Forecast f = nvar_forecast(model, make_task(ctx, 20));
    double y = ctx(599);
    for (Index h = 0; h < 20; ++h) {
        y = 3.9 * y * (1.0 - y);
        CAPTURE(h);
        CHECK(std::abs(f.values(h) - y) < 1e-3);
    }
}

TEST_CASE("nvar ridge limits") {
    const Vector x = logistic_orbit(300, 0.3);
    NvarConfig cfg;
    cfg.n_lags = 2;
    cfg.ridge = 1e14;
    const NvarModel model = nvar_fit(x, cfg);
    CHECK(model.weights().cwiseAbs().maxCoeff() < 1e-10);
    const Forecast f = nvar_forecast(model, make_task(x, 4));
    const double train_mean = x.tail(x.size() - 2).mean();  // targets of a 2-lag window
    for (Index h = 0; h < 4; ++h) CHECK(f.values(h) == doctest::Approx(train_mean).epsilon(1e-8));

    NvarConfig zero;
    zero.ridge = 0.0;
    CHECK_THROWS_AS(nvar_fit(Vector::Constant(40, 3.0), zero), FitFailure);
    NvarConfig neg;
    neg.ridge = -1.0;
    CHECK_THROWS_AS(nvar_fit(x, neg), InvalidArgument);
    CHECK_THROWS_AS(nvar_fit(x.head(2), NvarConfig{}), InvalidArgument);
}

TEST_CASE("nvar training residual does not grow with the quadratic block") {
    const auto& lorenz = testing::registry().get("lorenz");
    const Trajectory t = generate_trajectory(lorenz, lorenz.initial_state, 512, 30);
    for (int lags : {1, 3, 6}) {
        NvarConfig lin;
        lin.n_lags = lags;
        lin.max_order = 1;
        NvarConfig quad = lin;
        quad.max_order = 2;
        const Vector x = t.values.col(0);
        CAPTURE(lags);
        CHECK(nvar_training_residual(nvar_fit(x, quad), x) <= nvar_training_residual(nvar_fit(x, lin), x));
    }
}

TEST_CASE("diverging nvar rollouts are clipped and flagged") {
    Vector growth(40);
    growth(0) = 1.0;
    for (Index t = 1; t < 40; ++t) growth(t) = 1.3 * growth(t - 1);
    NvarConfig cfg;
    cfg.max_order = 1;
    const NvarModel model = nvar_fit(growth, cfg);
    const Vector ctx = growth.head(10);
    const Forecast f = nvar_forecast(model, make_task(ctx, 200));
    CHECK(f.metadata.at("diverged").get<bool>());
    CHECK(f.values.allFinite());
    const double center = ctx.mean();
    const double amp = (ctx.array() - center).abs().maxCoeff();
    CHECK(f.values.maxCoeff() <= center + 100.0 * amp);
}

TEST_CASE("parrot replays a periodic context") {
    const Index period = 37;
    Vector ctx(400);
    for (Index t = 0; t < 400; ++t) ctx(t) = std::sin(2.0 * M_PI * static_cast<double>(t) / period) +
                                             0.3 * std::cos(6.0 * M_PI * static_cast<double>(t) / period);
    ParrotConfig cfg;
    cfg.motif_len = 20;
    const Forecast f = parrot_forecast(make_task(ctx, 300), cfg);
    for (Index h = 0; h < 300; ++h) {
        const double t = static_cast<double>(400 + h);
        const double truth = std::sin(2.0 * M_PI * t / period) + 0.3 * std::cos(6.0 * M_PI * t / period);
        CHECK(std::abs(f.values(h) - truth) < 1e-9);
    }
    CHECK_FALSE(f.metadata.at("fallback").get<bool>());
    CHECK_FALSE(f.metadata.at("low_confidence").get<bool>());
}

TEST_CASE("parrot returns a duplicated future exactly") {
    // Segment S followed by future F, later S appears again at the end.
    const Vector s = noise(50, 1), fut = noise(120, 2), pre = noise(80, 3);
    Vector ctx(80 + 50 + 120 + 50);
    ctx << pre, s, fut, s;
    ParrotConfig cfg;
    cfg.motif_len = 30;
    const Forecast f = parrot_forecast(make_task(ctx, 120), cfg);
    CHECK(f.values == fut);
    CHECK(f.metadata.at("offsets")[0].get<Index>() == 80 + 20);
    CHECK(f.metadata.at("scores")[0].get<double>() == doctest::Approx(1.0));
}

TEST_CASE("parrot matches the brute-force offset and is affine invariant") {
    for (Seed seed = 0; seed < 25; ++seed) {
        const Vector ctx = noise(200, seed);
        ParrotConfig cfg;
        cfg.motif_len = 15;
        const Forecast f = parrot_forecast(make_task(ctx, 10), cfg);
        const auto [j, r] = brute_best_match(ctx, 15);
        CHECK(f.metadata.at("offsets")[0].get<Index>() == j);
        CHECK(std::abs(f.metadata.at("scores")[0].get<double>() - r) < 1e-12);

        const Vector moved = (2.5 * ctx.array() + 7.0).matrix();
        const Forecast g = parrot_forecast(make_task(moved, 10), cfg);
        CHECK(g.metadata.at("offsets")[0] == f.metadata.at("offsets")[0]);
    }
}

TEST_CASE("parrot on noise is indistinguishable from the shuffled-context null") {
    // Null: best first-match score over 1000 shuffled copies of the same context.
    const Index c = 512, m = 30;
    const Vector ctx = noise(c, 99);
    ParrotConfig cfg;
    cfg.motif_len = static_cast<int>(m);
    const Forecast f = parrot_forecast(make_task(ctx, 50), cfg);
    const double observed = f.metadata.at("scores")[0].get<double>();

    std::mt19937_64 rng(5);
    std::vector<double> null;
    Vector shuffled = ctx;
    for (int i = 0; i < 1000; ++i) {
        std::shuffle(shuffled.data(), shuffled.data() + c, rng);
        null.push_back(brute_best_match(shuffled, m).second);
    }
    const auto below = std::count_if(null.begin(), null.end(), [&](double v) { return v < observed; });
    const double quantile = static_cast<double>(below) / 1000.0;
    CAPTURE(observed);
    CHECK(quantile > 0.005);
    CHECK(quantile < 0.995);
    CHECK(f.metadata.at("low_confidence").get<bool>());

    // The analytic threshold sits near the null's 99th percentile.
    std::sort(null.begin(), null.end());
    const double thr = f.metadata.at("null_threshold").get<double>();
    CHECK(thr > null[950]);
    CHECK(thr < null[999] + 0.05);
}

TEST_CASE("parrot fallbacks") {
    SUBCASE("constant query falls back to naive") {
        Vector ctx = noise(100, 4);
        ctx.tail(30).setConstant(1.5);
        const Forecast f = parrot_forecast(make_task(ctx, 7), ParrotConfig{});
        CHECK(f.metadata.at("fallback").get<bool>());
        CHECK((f.values.array() == 1.5).all());
    }
    SUBCASE("short contexts shrink the motif") {
        const Vector ctx = noise(9, 5);
        const ParrotForecaster p;
        const Forecast f = p.forecast(make_task(ctx, 5));
        CHECK(f.metadata.at("motif_len").get<int>() == 4);
        CHECK(f.values.size() == 5);
        const Forecast g = p.forecast(make_task(ctx.head(3), 5));
        CHECK(g.metadata.at("fallback").get<bool>());
        CHECK((g.values.array() == ctx(2)).all());
    }
    SUBCASE("context shorter than two motifs is rejected") {
        CHECK_THROWS_AS(parrot_forecast(make_task(noise(40, 6), 5), ParrotConfig{}), InvalidArgument);
    }
    CHECK_FALSE(window_similarity(Vector::Constant(5, 1.0), noise(5, 1), Similarity::pearson).has_value());
}

TEST_CASE("rematching keeps the forecast inside the context's values") {
    const auto& lorenz = testing::registry().get("lorenz");
    const Trajectory t = generate_trajectory(lorenz, lorenz.initial_state, 200, 30);
    const Vector ctx = t.values.col(0);
    ParrotConfig cfg;
    cfg.rematch_interval = 25;
    const Forecast f = parrot_forecast(make_task(ctx, 300), cfg);
    CHECK(f.metadata.at("offsets").size() >= 12);
    for (Index h = 0; h < 300; ++h) CHECK((ctx.array() == f.values(h)).any());
}

TEST_CASE("forecasters are deterministic") {
    const Vector ctx = logistic_orbit(512, 0.41);
    const NvarForecaster nv;
    const ParrotForecaster p;
    const NaiveForecaster n;
    for (const Forecaster* model : std::initializer_list<const Forecaster*>{&nv, &p, &n}) {
        const Forecast a = model->forecast(make_task(ctx, 300));
        const Forecast b = model->forecast(make_task(ctx, 300));
        CHECK(a.values == b.values);
        CHECK(a.values.size() == 300);
        CHECK(a.values.allFinite());
    }
}

TEST_CASE("channel modes") {
    const auto& lorenz = testing::registry().get("lorenz");
    const Trajectory t = generate_trajectory(lorenz, lorenz.initial_state, 300, 30);
    const NvarForecaster nv(NvarConfig{4, 2, 1e-4, 1});

    const auto ci = forecast_multichannel(nv, t.values, 50, t.dt_lyap, ChannelMode::channel_independent);
    const auto mv = forecast_multichannel(nv, t.values, 50, t.dt_lyap, ChannelMode::multivariate);
    CHECK(ci.size() == 3);
    CHECK(mv.size() == 3);

    const Matrix one = t.values.leftCols(1);
    const auto ci1 = forecast_multichannel(nv, one, 50, t.dt_lyap, ChannelMode::channel_independent);
    const auto mv1 = forecast_multichannel(nv, one, 50, t.dt_lyap, ChannelMode::multivariate);
    CHECK(ci1[0].values == mv1[0].values);

    CHECK_THROWS_AS(
        forecast_multichannel(ParrotForecaster{}, t.values, 50, t.dt_lyap, ChannelMode::multivariate),
        UnsupportedMode);
    CHECK(channel_mode_from_string(to_string(ChannelMode::multivariate)) == ChannelMode::multivariate);
}

TEST_CASE("lookback tuning") {
    const auto& lorenz = testing::registry().get("lorenz");
    ExperimentConfig cfg;
    cfg.n_ics = 4;
    cfg.seed = 3;
    const auto windows = generate_windows(lorenz, cfg, 812);
    std::vector<Matrix> ctx;
    for (const auto& w : windows) ctx.push_back(w.topRows(512).leftCols(1));
    const NvarForecaster nv;

    SUBCASE("single candidate") {
        const auto r = tune_lookback(nv, ctx, 435, 77, {0.333}, 30, ChannelMode::channel_independent, 1.0 / 30);
        CHECK(r.best_lookback_lyap == 0.333);
        CHECK(r.best_lags == 10);
        CHECK(r.table.size() == 1);
    }
    SUBCASE("full grid is reproducible with one row per value") {
        const auto grid = default_lookback_grid();
        const auto a = tune_lookback(nv, ctx, 435, 77, grid, 30, ChannelMode::channel_independent, 1.0 / 30);
        const auto b = tune_lookback(nv, ctx, 435, 77, grid, 30, ChannelMode::channel_independent, 1.0 / 30);
        CHECK(a.table.size() == grid.size());
        CHECK(a.best_lags == b.best_lags);
        for (std::size_t i = 0; i < grid.size(); ++i) CHECK(a.table[i].score == b.table[i].score);
        const auto best = std::min_element(a.table.begin(), a.table.end(),
                                           [](const TuneRow& x, const TuneRow& y) { return x.score < y.score; });
        CHECK(best->lags == a.best_lags);
    }
    SUBCASE("ties go to the smaller lookback") {
        const auto r = tune_lookback(NvarForecaster{}, ctx, 435, 77, {0.5, 0.2, 0.9}, 30,
                                     ChannelMode::channel_independent, 1.0 / 30);
        CHECK(r.table.front().lookback_lyap == 0.2);
        // A model whose score ignores the lookback ties everywhere.
        struct Flat final : Forecaster {
            int lags = 1;
            std::string id() const override { return "flat"; }
            bool tunable() const override { return true; }
            std::unique_ptr<Forecaster> with_lookback(int l) const override {
                auto f = std::make_unique<Flat>();
                f->lags = l;
                return f;
            }
            Forecast forecast(const ForecastTask& t) const override { return naive_forecast(t); }
        };
        const auto tie = tune_lookback(Flat{}, ctx, 435, 77, {0.5, 0.2, 0.9}, 30,
                                       ChannelMode::channel_independent, 1.0 / 30);
        CHECK(tie.best_lookback_lyap == 0.2);
    }
    SUBCASE("failing grid points score infinity") {
        const auto r = tune_lookback(nv, ctx, 435, 77, {0.1, 20.0}, 30, ChannelMode::channel_independent, 1.0 / 30);
        REQUIRE(r.table.size() == 2);
        CHECK(std::isinf(r.table[1].score));
        CHECK_FALSE(r.table[1].failure.empty());
        CHECK(r.best_lookback_lyap == 0.1);
    }
}
