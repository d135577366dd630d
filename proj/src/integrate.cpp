#include "chaosbench/systems.hpp"

#include "ode.hpp"

#include <cmath>
#include <random>

namespace chaosbench {

namespace {

double output_spacing(const SystemSpec& spec, const IntegratorConfig& cfg) {
    double h = spec.integration_dt;
    if (cfg.max_step > 0.0) h = std::min(h, cfg.max_step);
    if (!(h > 0.0)) throw InvalidArgument("system '" + spec.name + "' has no integration_dt");
    return h;
}

double lyap_units(const SystemSpec& spec, double dt) {
    return spec.lyapunov_exponent > 0.0 ? dt * spec.lyapunov_exponent : dt;
}

}  // namespace

Trajectory integrate(const SystemSpec& spec, const Eigen::Ref<const Vector>& x0, double duration,
                     const IntegratorConfig& cfg) {
    cfg.validate();
    if (!spec.registered()) throw InvalidArgument("system '" + spec.name + "' has no vector field");
    if (x0.size() != spec.dim) throw InvalidArgument("initial state has wrong dimension");
    if (!x0.allFinite()) throw InvalidArgument("initial state is not finite");
    if (!(duration >= 0.0)) throw InvalidArgument("duration must be non-negative");

    const double h = output_spacing(spec, cfg);
    const Index n = std::max<Index>(1, std::llround(duration / h));

    Trajectory out;
    out.values.resize(n, spec.dim);
    out.dt = h;
    out.dt_lyap = lyap_units(spec, h);
    out.system = spec.name;
    out.values.row(0) = x0.transpose();

    Vector x = x0;
    double t = 0.0;
    auto rhs = [&spec](const Vector& s, Vector& ds) { spec.field(s, ds); };
    detail::with_stepper(rhs, spec.dim, cfg, [&](auto& stepper) {
        for (Index k = 1; k < n; ++k) {
            stepper.advance(t, x, static_cast<double>(k) * h);
            out.values.row(k) = x.transpose();
        }
    });
    return out;
}

Trajectory resample(const Trajectory& raw, double lyapunov_exponent, int points_per_lyapunov) {
    if (!(lyapunov_exponent > 0.0))
        throw InvalidArgument("resampling needs a positive Lyapunov exponent");
    if (points_per_lyapunov < 1) throw InvalidArgument("points_per_lyapunov must be >= 1");
    if (!(raw.dt > 0.0) || raw.length() < 1) throw InvalidArgument("raw trajectory is empty");

    const double src_lyap = raw.dt * lyapunov_exponent;
    const double tgt_lyap = 1.0 / points_per_lyapunov;
    const double ratio = tgt_lyap / src_lyap;
    if (ratio < 1.0 - 1e-9)
        throw UpsamplingRefused("target grid (" + std::to_string(tgt_lyap) +
                                " Lyapunov times) is finer than the source grid (" +
                                std::to_string(src_lyap) + ")");

    const Index src_n = raw.length();
    const double rounded = std::round(ratio);
    const bool integer_ratio = std::abs(ratio - rounded) < 1e-9 * ratio;
    const double step = integer_ratio ? rounded : ratio;

    Index n = std::max<Index>(1, std::llround(static_cast<double>(src_n) / step));
    while (n > 1 && static_cast<double>(n - 1) * step > static_cast<double>(src_n - 1) + 1e-9) --n;

    Trajectory out;
    out.values.resize(n, raw.dim());
    out.dt = raw.dt * step;
    out.dt_lyap = tgt_lyap;
    out.t0 = raw.t0;
    out.system = raw.system;

    if (integer_ratio) {
        const Index stride = static_cast<Index>(rounded);
        for (Index k = 0; k < n; ++k) out.values.row(k) = raw.values.row(k * stride);
        return out;
    }

    for (Index k = 0; k < n; ++k) {
        const double s = static_cast<double>(k) * step;
        const Index i = std::min<Index>(static_cast<Index>(std::floor(s)), src_n - 1);
        const double frac = s - static_cast<double>(i);
        if (frac < 1e-12 || src_n == 1) {
            out.values.row(k) = raw.values.row(i);
            continue;
        }
        if (src_n < 4) {
            out.values.row(k) = (1.0 - frac) * raw.values.row(i) + frac * raw.values.row(i + 1);
            continue;
        }
        const Index base = std::clamp<Index>(i - 1, 0, src_n - 4);
        // Weights sum to one, so interpolate offsets from row i; constants
        // then come out exactly.
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(raw.dim());
        for (Index a = 0; a < 4; ++a) {
            double w = 1.0;
            for (Index b = 0; b < 4; ++b) {
                if (a == b) continue;
                w *= (s - static_cast<double>(base + b)) / static_cast<double>(a - b);
            }
            acc += w * (raw.values.row(base + a) - raw.values.row(i));
        }
        out.values.row(k) = raw.values.row(i) + acc;
    }
    return out;
}

Vector attractor_extent(const SystemSpec& spec, const IntegratorConfig& cfg) {
    const double tau = spec.lyapunov_time();
    const double span = std::isfinite(tau) ? 50.0 * tau : 100.0;
    Trajectory burn = integrate(spec, spec.initial_state, spec.burn_in_time, cfg);
    Vector start = burn.values.row(burn.length() - 1).transpose();
    Trajectory orbit = integrate(spec, start, span, cfg);
    return (orbit.values.colwise().maxCoeff() - orbit.values.colwise().minCoeff()).transpose();
}

Matrix sample_initial_conditions(const SystemSpec& spec, int n, const IntegratorConfig& cfg,
                                 Seed seed) {
    if (n < 1) throw InvalidArgument("need at least one initial condition");
    const Vector extent = attractor_extent(spec, cfg);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    Matrix out(n, spec.dim);
    for (int i = 0; i < n; ++i) {
        Vector x = spec.initial_state;
        for (Index d = 0; d < spec.dim; ++d) x(d) += 0.01 * extent(d) * unit(rng);
        Trajectory burn = integrate(spec, x, spec.burn_in_time, cfg);
        // The grid may stop short of burn_in_time by up to half a step.
        Vector end = burn.values.row(burn.length() - 1).transpose();
        const double covered = static_cast<double>(burn.length() - 1) * burn.dt;
        if (covered < spec.burn_in_time) {
            Trajectory tail = integrate(spec, end, 2.0 * burn.dt, cfg);
            end = tail.values.row(tail.length() - 1).transpose();
        }
        out.row(i) = end.transpose();
    }
    return out;
}

Trajectory generate_trajectory(const SystemSpec& spec, const Eigen::Ref<const Vector>& x0,
                               Index length, int points_per_lyapunov, const IntegratorConfig& cfg) {
    if (length < 1) throw InvalidArgument("trajectory length must be positive");
    if (!(spec.lyapunov_exponent > 0.0))
        throw InvalidArgument("system '" + spec.name + "' has no positive Lyapunov exponent");
    const double tau = spec.lyapunov_time();
    const double duration = (static_cast<double>(length) + 2.0) * tau / points_per_lyapunov;
    Trajectory raw = integrate(spec, x0, duration, cfg);
    Trajectory out = resample(raw, spec.lyapunov_exponent, points_per_lyapunov);
    if (out.length() < length) throw NumericFailure("resampled trajectory is too short");
    out.values.conservativeResize(length, Eigen::NoChange);
    return out;
}

}  // namespace chaosbench
