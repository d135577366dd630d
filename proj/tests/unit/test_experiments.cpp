#include "support.hpp"

#include "chaosbench/experiments.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <mutex>
#include <random>
#include <set>

using namespace chaosbench;
using nlohmann::json;

namespace {

Matrix labelled(Index c, Index d = 1) {
    Matrix m(c, d);
    for (Index i = 0; i < c; ++i)
        for (Index j = 0; j < d; ++j) m(i, j) = static_cast<double>(i + 1) + 0.001 * static_cast<double>(j);
    return m;
}

std::vector<double> column(const Matrix& m) { return {m.data(), m.data() + m.rows()}; }

ExperimentConfig small_config(ExperimentKind kind = ExperimentKind::baseline) {
    ExperimentConfig cfg;
    cfg.systems = {"lorenz"};
    cfg.n_ics = 2;
    cfg.seed = 5;
    cfg.kind = kind;
    cfg.threads = 2;
    return cfg;
}

// Records every context (as flat values) any forecaster copy is shown.
struct SpyLog {
    std::mutex mutex;
    std::vector<Matrix> contexts;
};

class Spy final : public Forecaster {
public:
    explicit Spy(std::shared_ptr<SpyLog> log, int lags = 1) : log_(std::move(log)), lags_(lags) {}
    std::string id() const override { return "spy"; }
    bool supports_multivariate() const override { return true; }
    bool tunable() const override { return true; }
    int lookback() const override { return lags_; }
    std::unique_ptr<Forecaster> with_lookback(int lags) const override { return std::make_unique<Spy>(log_, lags); }
    Forecast forecast(const ForecastTask& task) const override {
        {
            std::lock_guard lock(log_->mutex);
            log_->contexts.emplace_back(task.context);
        }
        return naive_forecast(task);
    }
    std::vector<Forecast> forecast_joint(const Eigen::Ref<const Matrix>& context, Index horizon,
                                         double dt_lyap) const override {
        {
            std::lock_guard lock(log_->mutex);
            log_->contexts.emplace_back(context);
        }
        std::vector<Forecast> out;
        for (Index c = 0; c < context.cols(); ++c) {
            ForecastTask t;
            t.context = context.col(c);
            t.horizon = horizon;
            t.dt_lyap = dt_lyap;
            out.push_back(naive_forecast(t));
        }
        return out;
    }

private:
    std::shared_ptr<SpyLog> log_;
    int lags_;
};

ResultRecord fake(const std::string& model, double vpt, const std::string& system = "s", int ic = 0,
                  bool ok = true) {
    ResultRecord r;
    r.system = system;
    r.ic_index = ic;
    r.model_id = model;
    r.experiment_kind = "baseline";
    r.mode = "channel_independent";
    r.metrics.vpt_lyap = vpt;
    r.metrics.smape_curve = Vector::Constant(3, vpt);
    if (!ok) {
        r.status = "failed";
        r.failure_reason = "boom";
    }
    return r;
}

}  // namespace

TEST_CASE("k-gram shuffle worked examples") {
    ShuffleOptions free;
    free.keep_final_block = false;
    const Matrix x = labelled(4);

    SUBCASE("2-gram: the only other arrangement of two blocks") {
        for (Seed s = 0; s < 50; ++s) CHECK(column(kgram_shuffle(x, 2, s, free)) == std::vector<double>{3, 4, 1, 2});
    }
    SUBCASE("1-gram: (x1, x4, x2, x3) is drawn, identity never is") {
        bool seen = false;
        for (Seed s = 0; s < 400; ++s) {
            const auto out = column(kgram_shuffle(x, 1, s, free));
            CHECK(out != std::vector<double>{1, 2, 3, 4});
            auto sorted = out;
            std::sort(sorted.begin(), sorted.end());
            CHECK(sorted == std::vector<double>{1, 2, 3, 4});
            seen = seen || out == std::vector<double>{1, 4, 2, 3};
        }
        CHECK(seen);
    }
}

TEST_CASE("k-gram shuffle invariants") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 300; ++trial) {
        const Index c = std::uniform_int_distribution<Index>(6, 120)(rng);
        const int k = static_cast<int>(std::uniform_int_distribution<Index>(1, c / 3)(rng));
        const Matrix x = labelled(c, 2);
        const Matrix y = kgram_shuffle(x, k, rng());
        CAPTURE(c);
        CAPTURE(k);
        CHECK(y.bottomRows(k) == x.bottomRows(k));
        CHECK(y.middleRows(c - 2 * k, k) != x.middleRows(c - 2 * k, k));
        // Multiset of blocks, counted from the end with a ragged head.
        auto blocks = [&](const Matrix& m) {
            std::multiset<std::vector<double>> out;
            std::vector<double> head;
            const Index rem = c % k;
            // The ragged block may land anywhere; find it by its first label.
            for (Index i = 0; i < c;) {
                const auto label = static_cast<Index>(m(i, 0)) - 1;
                const Index len = label < rem ? rem : k;
                out.insert(std::vector<double>(m.col(0).data() + i, m.col(0).data() + i + len));
                i += len;
            }
            return out;
        };
        CHECK(blocks(y) == blocks(x));
    }
}

TEST_CASE("k-gram shuffle errors") {
    CHECK_THROWS_AS(kgram_shuffle(labelled(10), 6, 0), InvalidArgument);
    CHECK_THROWS_AS(kgram_shuffle(labelled(10), 0, 0), InvalidArgument);
    CHECK_THROWS_AS(kgram_shuffle(labelled(4), 2, 0), ShuffleImpossible);  // one movable block
    CHECK_THROWS_AS(kgram_shuffle(Matrix::Constant(12, 1, 3.0), 2, 0), ShuffleImpossible);
    // A ragged head makes k = C/2 with odd C shufflable.
    const Matrix y = kgram_shuffle(labelled(5), 2, 1);
    CHECK(column(y) == std::vector<double>{2, 3, 1, 4, 5});
}

TEST_CASE("nonstationary modulation") {
    const Vector two = nonstationarity_factors(2, 0.5);
    CHECK(two(0) == 1.0);
    CHECK(two(1) == 0.5);
    const Vector three = nonstationarity_factors(3, 0.25);
    CHECK(three(0) == 1.0);
    CHECK(three(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(three(2) == 0.25);

    const Vector f = nonstationarity_factors(812, 0.2);
    for (Index t = 1; t < f.size(); ++t) CHECK(f(t) < f(t - 1));

    const auto& lorenz = testing::registry().get("lorenz");
    const Trajectory t = generate_trajectory(lorenz, lorenz.initial_state, 100, 30);
    const Trajectory same = apply_nonstationarity(t, 1.0);
    CHECK(same.values == t.values);
    CHECK_THROWS_AS(apply_nonstationarity(t, 0.0), InvalidArgument);
    CHECK_THROWS_AS(apply_nonstationarity(t, -0.5), InvalidArgument);
    CHECK_THROWS_AS(apply_nonstationarity(t, 1.5), InvalidArgument);
}

TEST_CASE("split window seals the test segment") {
    const Matrix w = labelled(20, 2);
    const TaskSplit s = split_window(w, 8, 5);
    CHECK(s.context.rows() == 8);
    CHECK(s.context(0, 0) == 8.0);
    CHECK(s.context(7, 0) == 15.0);
    CHECK(s.test.rows() == 5);
    CHECK(s.test.cols() == 2);
    CHECK_THROWS_AS(split_window(w, 16, 5), InvalidArgument);
}

TEST_CASE("windows share their test segment and ICs are reproducible") {
    const auto& lorenz = testing::registry().get("lorenz");
    ExperimentConfig cfg = small_config();
    const auto a = generate_windows(lorenz, cfg, 812);
    const auto b = generate_windows(lorenz, cfg, 400);
    REQUIRE(a.size() == 2);
    CHECK(a[0] == b[0]);
    CHECK(a[0].rows() == 812);
    CHECK(a[0] != a[1]);
}

TEST_CASE("no forecaster or tuner ever sees a test point") {
    const auto& lorenz = testing::registry().get("lorenz");
    for (auto kind : {ExperimentKind::baseline, ExperimentKind::context_sweep, ExperimentKind::kgram_shuffle,
                      ExperimentKind::nonstationary}) {
        ExperimentConfig cfg = small_config(kind);
        if (kind == ExperimentKind::context_sweep) cfg.kind_params = {{"context_lens", {16, 160, 512}}};
        if (kind == ExperimentKind::kgram_shuffle) cfg.kind_params = {{"k", {1, 8, 128}}};
        if (kind == ExperimentKind::nonstationary) cfg.kind_params = {{"f_min", {1.0, 0.5}}};
        for (auto mode : {ChannelMode::channel_independent, ChannelMode::multivariate}) {
            cfg.mode = mode;
            auto log = std::make_shared<SpyLog>();
            RunSummary summary;
            const auto records = run_collect(cfg, testing::registry(), &summary, {std::make_shared<Spy>(log)});
            CHECK(summary.failures == 0);
            CHECK_FALSE(log->contexts.empty());

            std::set<double> test_values;
            for (const Matrix& w : generate_windows(lorenz, cfg, required_context(cfg) + cfg.horizon)) {
                std::vector<Matrix> variants = {w};
                if (kind == ExperimentKind::nonstationary)
                    variants.push_back(apply_nonstationarity(Matrix(w.bottomRows(512 + 300)), 0.5));
                for (const Matrix& v : variants) {
                    const Matrix tail = v.bottomRows(cfg.horizon);
                    test_values.insert(tail.data(), tail.data() + tail.size());
                }
            }
            std::size_t leaked = 0;
            for (const Matrix& ctx : log->contexts)
                for (Index i = 0; i < ctx.size(); ++i) leaked += test_values.count(ctx.data()[i]);
            CAPTURE(to_string(kind));
            CHECK(leaked == 0);
        }
    }
}

TEST_CASE("record counts and determinism") {
    ExperimentConfig cfg;
    cfg.systems = {"lorenz", "rossler"};
    cfg.n_ics = 2;
    cfg.models = {"naive", "parrot"};
    cfg.seed = 21;
    cfg.threads = 1;
    const auto a = run_collect(cfg, testing::registry());
    CHECK(a.size() == 24);
    cfg.threads = 4;
    const auto b = run_collect(cfg, testing::registry());
    REQUIRE(b.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(record_payload(a[i]) == record_payload(b[i]));
    for (const auto& r : a) {
        CHECK(r.ok());
        CHECK(r.harness_version == harness_version());
        CHECK_FALSE(r.system.empty());
        CHECK(r.metrics.smape_curve.size() == 300);
        CHECK(r.metrics.vpt_lyap >= 0.0);
        CHECK((r.metrics.smape_curve.array() >= 0.0).all());
        CHECK((r.metrics.smape_curve.array() <= 200.0).all());
        REQUIRE(r.metrics.d_stsp.has_value());
        CHECK(*r.metrics.d_stsp >= -3.0 * r.metrics.d_stsp_se.value());
    }
    cfg.seed = 22;
    const auto c = run_collect(cfg, testing::registry());
    CHECK(record_payload(c[0]) != record_payload(a[0]));
}

TEST_CASE("experiment variants") {
    SUBCASE("shuffle pairs and the k = C/2 truncation matches a shorter baseline") {
        ExperimentConfig cfg = small_config(ExperimentKind::kgram_shuffle);
        cfg.models = {"parrot"};
        cfg.kind_params = {{"k", {4, 256}}};
        RunSummary summary;
        const auto recs = run_collect(cfg, testing::registry(), &summary);
        CHECK(recs.size() == 2 * 2 * 2 * 3);

        ExperimentConfig base = small_config();
        base.models = {"parrot"};
        base.context_len = 256;
        base.tune = false;
        const auto ref = run_collect(base, testing::registry());
        std::size_t matched = 0;
        for (const auto& r : recs) {
            if (r.kind_params.at("k") != 256 || r.kind_params.at("condition") != "truncated") continue;
            for (const auto& b : ref)
                if (b.ic_index == r.ic_index && b.channel == r.channel) {
                    CHECK(b.metrics.smape_curve == r.metrics.smape_curve);
                    CHECK(b.metrics.vpt_lyap == r.metrics.vpt_lyap);
                    CHECK(b.metrics.context_overlap == r.metrics.context_overlap);
                    ++matched;
                }
        }
        CHECK(matched == 6);
        CHECK(summary.summary.contains("kgram_shuffle"));
    }
    SUBCASE("f_min = 1 reproduces the baseline") {
        ExperimentConfig cfg = small_config(ExperimentKind::nonstationary);
        cfg.models = {"naive", "parrot"};
        cfg.kind_params = {{"f_min", {1.0}}};
        const auto ns = run_collect(cfg, testing::registry());
        ExperimentConfig base = small_config();
        base.models = cfg.models;
        const auto ref = run_collect(base, testing::registry());
        REQUIRE(ns.size() == ref.size());
        for (std::size_t i = 0; i < ns.size(); ++i) {
            CHECK(ns[i].metrics.smape_curve == ref[i].metrics.smape_curve);
            CHECK(ns[i].metrics.vpt_lyap == ref[i].metrics.vpt_lyap);
        }
        cfg.kind_params = {{"f_min", {1.0, 0.6, 0.2}}};
        CHECK(run_collect(cfg, testing::registry()).size() == 3 * ref.size());
    }
    SUBCASE("context sweep records and summary") {
        ExperimentConfig cfg = small_config(ExperimentKind::context_sweep);
        cfg.models = {"parrot"};
        cfg.kind_params = {{"context_lens", {5, 51, 512}}};
        RunSummary summary;
        const auto recs = run_collect(cfg, testing::registry(), &summary);
        CHECK(recs.size() == 3 * 2 * 3);
        const auto& rows = summary.summary.at("context_sweep").at("parrot").at("by_context_len");
        CHECK(rows.size() == 3);
    }
    SUBCASE("ic dependence pairs") {
        ExperimentConfig cfg = small_config(ExperimentKind::ic_dependence);
        cfg.n_ics = 4;
        cfg.models = {"parrot"};
        cfg.kind_params = {{"reference_length", 2000}};
        RunSummary summary;
        const auto recs = run_collect(cfg, testing::registry(), &summary);
        const auto& ic = summary.summary.at("ic_dependence").at("parrot");
        CHECK(ic.at("pairs").size() == 4);
        CHECK(ic.at("n") == 4);
        for (const auto& r : recs) CHECK(r.analysis.at("relative_density").get<double>() > 0.0);
    }
}

TEST_CASE("failing models and systems do not stop the run") {
    struct Broken final : Forecaster {
        std::string id() const override { return "broken"; }
        Forecast forecast(const ForecastTask&) const override { throw FitFailure("always fails"); }
    };
    ExperimentConfig cfg = small_config();
    RunSummary summary;
    const auto recs = run_collect(cfg, testing::registry(), &summary,
                                  {std::make_shared<NaiveForecaster>(), std::make_shared<Broken>()});
    CHECK(recs.size() == 12);
    CHECK(summary.failures == 6);
    for (const auto& r : recs)
        if (r.model_id == "broken") {
            CHECK_FALSE(r.ok());
            CHECK(r.failure_reason.find("always fails") != std::string::npos);
        }

    SystemSpec blow;
    blow.name = "blowup";
    blow.family = "custom";
    blow.dim = 1;
    blow.integration_dt = 0.01;
    blow.lyapunov_exponent = 1.0;
    blow.reference_fractal_dim = 1.0;
    blow.burn_in_time = 5.0;
    blow.initial_state = Vector::Ones(1);
    blow.provenance = "test";
    blow.field = [](const Eigen::Ref<const Vector>& x, Eigen::Ref<Vector> out) { out(0) = x(0) * x(0); };
    std::vector<SystemSpec> specs = {testing::registry().get("lorenz"), blow};
    const Registry reg(specs);
    ExperimentConfig two = small_config();
    two.systems = {"blowup", "lorenz"};
    two.models = {"naive"};
    RunSummary s2;
    RunOptions opts;
    std::vector<std::string> logged;
    opts.log = [&](const std::string& line) { logged.push_back(line); };
    std::vector<ResultRecord> out;
    opts.sink = [&](const ResultRecord& r) { out.push_back(r); };
    s2 = run_benchmark(two, reg, opts);
    CHECK(out.size() == 6);
    CHECK(s2.skipped_systems == std::vector<std::string>{"blowup"});
    CHECK_FALSE(logged.empty());
}

TEST_CASE("config validation") {
    ExperimentConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.train_len = 400;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.tune = false;
    CHECK_NOTHROW(cfg.validate());
    cfg = {};
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.kind = ExperimentKind::kgram_shuffle;
    cfg.kind_params = {{"k", {300}}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.kind_params = {{"k", {1, 256}}};
    CHECK_NOTHROW(cfg.validate());
    cfg.kind = ExperimentKind::nonstationary;
    cfg.kind_params = {{"f_min", {1.0, 0.0}}};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    ExperimentConfig rt = experiment_config_from_json(to_json(ExperimentConfig{}));
    CHECK(to_json(rt) == to_json(ExperimentConfig{}));
    CHECK_THROWS_AS(make_forecaster("lstm", ExperimentConfig{}), InvalidArgument);
}

TEST_CASE("statistics") {
    CHECK(median({3.0}) == 3.0);
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == 2.5);
    CHECK_THROWS_AS(median({}), InvalidArgument);
    CHECK(bootstrap_median_se({7.0}, 1000, 1) == 0.0);
    CHECK(bootstrap_median_se({1.0, 2.0, 3.0, 4.0, 5.0}, 1000, 1) > 0.0);

    Vector a(30), b(30);
    for (Index i = 0; i < 30; ++i) {
        a(i) = static_cast<double>(i);
        b(i) = static_cast<double>(i) + (i % 3 == 0 ? 5.0 : 0.0);
    }
    const auto t = spearman_permutation(a, b, 2000, 3);
    REQUIRE(t.rho.has_value());
    CHECK(*t.rho > 0.9);
    CHECK(t.p_greater < 0.01);
    CHECK(t.p_less > 0.99);
    CHECK_FALSE(spearman_permutation(a, Vector::Constant(30, 1.0), 100, 3).rho.has_value());

    std::vector<double> x(40), y(40);
    for (int i = 0; i < 40; ++i) {
        x[i] = 1.0 + 0.01 * i;
        y[i] = 0.5 + 0.02 * (i % 7);
    }
    const auto p = paired_permutation(x, y, 5000, 4);
    CHECK(p.mean_difference > 0.0);
    CHECK(p.p_greater < 0.01);
    CHECK(paired_permutation(y, x, 5000, 4).p_greater > 0.99);
}

TEST_CASE("aggregation") {
    std::vector<ResultRecord> recs = {fake("a", 1.0), fake("b", 2.0), fake("a", 3.0, "s", 1), fake("a", 5.0, "t"),
                                      fake("b", 9.0, "s", 1, false), fake("c", 0.0, "s", 0, false)};
    const auto table = aggregate(recs, {"model_id"}, 3);
    CHECK(table.rows.size() == 2);
    CHECK(table.warnings.size() == 1);
    CHECK(table.rows[0].key == std::vector<std::string>{"a"});
    CHECK(table.rows[0].n_ok == 3);
    CHECK(table.rows[0].metrics.at("vpt_lyap").median == 3.0);
    CHECK(table.rows[1].n_ok == 1);
    CHECK(table.rows[1].n_failed == 1);
    CHECK(table.rows[1].metrics.at("vpt_lyap").median == 2.0);
    CHECK(table.rows[1].metrics.at("vpt_lyap").standard_error == 0.0);

    const auto two = aggregate(recs, {"system", "model_id"}, 3);
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& r : recs)
        if (r.ok()) keys.insert({r.system, r.model_id});
    CHECK(two.rows.size() == keys.size());

    // Brute-force medians over random synthetic records.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    std::vector<ResultRecord> many;
    std::map<std::string, std::vector<double>> by;
    for (int i = 0; i < 300; ++i) {
        const std::string m = "m" + std::to_string(i % 4);
        const double v = u(rng);
        many.push_back(fake(m, v, "s", i));
        by[m].push_back(v);
    }
    for (const auto& row : aggregate(many, {"model_id"}, 1).rows) {
        auto v = by.at(row.key[0]);
        std::sort(v.begin(), v.end());
        const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
        CHECK(row.metrics.at("vpt_lyap").median == med);
        CHECK(row.median_smape_curve(0) == med);
    }
    CHECK(record_key(recs[0], "kind_params.k").empty());
    CHECK(record_key(recs[0], "ic_index") == "0");
}
