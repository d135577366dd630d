#include "chaosbench/systems.hpp"

#include "ode.hpp"

#include <cmath>
#include <numeric>
#include <random>

namespace chaosbench {

// Benettin-style estimate: one tangent vector carried along the orbit by the
// linearized flow, renormalized every few output steps; the exponent is the
// mean log growth rate. Jacobian-vector products use central differences, so
// any registered field works without an analytic Jacobian.
LyapunovEstimate estimate_lyapunov(const SystemSpec& spec, const IntegratorConfig& cfg,
                                   double horizon, Seed seed) {
    cfg.validate();
    if (!spec.registered()) throw InvalidArgument("system '" + spec.name + "' has no vector field");
    if (spec.lyapunov_exponent > 0.0 && horizon < 100.0 * spec.lyapunov_time())
        throw InvalidArgument("horizon must cover at least 100 Lyapunov times");
    if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");

    const Index d = spec.dim;
    const double interval = 10.0 * spec.integration_dt;
    const auto n_intervals = static_cast<Index>(std::llround(horizon / interval));
    if (n_intervals < 40) throw InvalidArgument("horizon too short for the renormalization grid");

    Trajectory burn = integrate(spec, spec.initial_state, spec.burn_in_time, cfg);

    Vector y(2 * d);
    y.head(d) = burn.values.row(burn.length() - 1).transpose();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    for (Index i = 0; i < d; ++i) y(d + i) = gauss(rng);
    y.tail(d).normalize();

    Vector fp(d), fm(d), probe(d);
    auto rhs = [&](const Vector& s, Vector& ds) {
        const auto x = s.head(d);
        const auto v = s.tail(d);
        Eigen::Ref<Vector> head = ds.head(d);
        spec.field(x, head);
        const double vn = v.norm();
        if (vn == 0.0) {
            ds.tail(d).setZero();
            return;
        }
        const double eps = 1e-7 * (1.0 + x.norm()) / vn;
        probe = x + eps * v;
        spec.field(probe, fp);
        probe = x - eps * v;
        spec.field(probe, fm);
        ds.tail(d) = (fp - fm) / (2.0 * eps);
    };

    std::vector<double> growth;
    growth.reserve(static_cast<std::size_t>(n_intervals));
    double t = 0.0;
    detail::with_stepper(rhs, 2 * d, cfg, [&](auto& stepper) {
        for (Index k = 1; k <= n_intervals; ++k) {
            stepper.advance(t, y, static_cast<double>(k) * interval);
            const double norm = y.tail(d).norm();
            if (!(norm > 0.0) || !std::isfinite(norm))
                throw EstimationFailure("tangent vector collapsed or diverged");
            growth.push_back(std::log(norm));
            y.tail(d) /= norm;
        }
    });

    // Let the tangent vector align with the dominant direction first.
    const std::size_t skip = std::max<std::size_t>(10, growth.size() / 20);
    const std::size_t used = growth.size() - skip;
    const double total = std::accumulate(growth.begin() + static_cast<long>(skip), growth.end(), 0.0);
    const double lambda = total / (static_cast<double>(used) * interval);

    constexpr std::size_t batches = 20;
    const std::size_t per_batch = used / batches;
    std::vector<double> batch_means;
    for (std::size_t b = 0; b < batches; ++b) {
        const auto first = growth.begin() + static_cast<long>(skip + b * per_batch);
        batch_means.push_back(std::accumulate(first, first + static_cast<long>(per_batch), 0.0) /
                              (static_cast<double>(per_batch) * interval));
    }
    const double bm = std::accumulate(batch_means.begin(), batch_means.end(), 0.0) / batches;
    double var = 0.0;
    for (double v : batch_means) var += (v - bm) * (v - bm);
    var /= static_cast<double>(batches - 1);

    // Running estimate over the final fifth of the orbit must have settled.
    double running = std::accumulate(growth.begin() + static_cast<long>(skip),
                                     growth.end() - static_cast<long>(used / 5), 0.0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = growth.size() - used / 5; i < growth.size(); ++i) {
        running += growth[i];
        const double est = running / (static_cast<double>(i + 1 - skip) * interval);
        lo = std::min(lo, est);
        hi = std::max(hi, est);
    }
    if (hi - lo > 0.1 * std::abs(lambda) + 0.005)
        throw EstimationFailure("running Lyapunov estimate did not settle (spread " +
                                std::to_string(hi - lo) + ")");

    return {lambda, std::sqrt(var / batches)};
}

}  // namespace chaosbench
