#pragma once

// Internal ODE steppers shared by trajectory integration and the tangent-space
// Lyapunov estimator.

#include "chaosbench/errors.hpp"
#include "chaosbench/systems.hpp"

#include <algorithm>
#include <cmath>

namespace chaosbench::detail {

inline bool blown_up(const Vector& x) { return !x.allFinite() || x.cwiseAbs().maxCoeff() > 1e15; }

// Dormand–Prince 5(4) with local extrapolation and a standard I-controller.
// `F` is callable as f(const Vector& x, Vector& dxdt).
template <typename F>
class DormandPrince {
public:
    DormandPrince(F f, Index dim, double rel_tol, double abs_tol, double max_step)
        : f_(std::move(f)), rel_tol_(rel_tol), abs_tol_(abs_tol), max_step_(max_step),
          k1_(dim), k2_(dim), k3_(dim), k4_(dim), k5_(dim), k6_(dim), k7_(dim), tmp_(dim),
          next_(dim), err_(dim) {}

    // Advances (t, x) to exactly t_end. Throws IntegrationBlowup.
    void advance(double& t, Vector& x, double t_end) {
        if (h_ <= 0.0) h_ = initial_step(x, t_end - t);
        bool have_k1 = false;
        while (t < t_end) {
            double h = std::min(h_, t_end - t);
            if (max_step_ > 0.0) h = std::min(h, max_step_);
            const bool last = (t + h >= t_end);
            if (!have_k1) {
                f_(x, k1_);
                have_k1 = true;
            }
            tmp_ = x + h * (a21 * k1_);
            f_(tmp_, k2_);
            tmp_ = x + h * (a31 * k1_ + a32 * k2_);
            f_(tmp_, k3_);
            tmp_ = x + h * (a41 * k1_ + a42 * k2_ + a43 * k3_);
            f_(tmp_, k4_);
            tmp_ = x + h * (a51 * k1_ + a52 * k2_ + a53 * k3_ + a54 * k4_);
            f_(tmp_, k5_);
            tmp_ = x + h * (a61 * k1_ + a62 * k2_ + a63 * k3_ + a64 * k4_ + a65 * k5_);
            f_(tmp_, k6_);
            next_ = x + h * (b1 * k1_ + b3 * k3_ + b4 * k4_ + b5 * k5_ + b6 * k6_);
            f_(next_, k7_);
            err_ = h * (e1 * k1_ + e3 * k3_ + e4 * k4_ + e5 * k5_ + e6 * k6_ + e7 * k7_);

            double norm = 0.0;
            for (Index i = 0; i < x.size(); ++i) {
                const double sc = abs_tol_ + rel_tol_ * std::max(std::abs(x(i)), std::abs(next_(i)));
                const double r = err_(i) / sc;
                norm += r * r;
            }
            norm = std::sqrt(norm / static_cast<double>(x.size()));
            if (!std::isfinite(norm)) {
                if (h < 1e-14 * std::max(1.0, std::abs(t)))
                    throw IntegrationBlowup("integration produced non-finite values", t);
                h_ = h * 0.1;
                continue;
            }
            if (norm <= 1.0) {
                if (blown_up(next_)) throw IntegrationBlowup("trajectory diverged", t);
                t = last ? t_end : t + h;
                x = next_;
                k1_ = k7_;
                const double fac = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
                // Keep the controller's step when the output grid truncated it.
                if (!last || h == h_) h_ = h * fac;
            } else {
                h_ = h * std::max(0.2, 0.9 * std::pow(norm, -0.2));
                if (h_ < 1e-14 * std::max(1.0, std::abs(t)))
                    throw IntegrationBlowup("step size underflow", t);
            }
        }
    }

private:
    double initial_step(const Vector& x, double span) {
        f_(x, k1_);
        const double d0 = x.norm(), d1 = k1_.norm();
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h = std::min(h, span > 0.0 ? span : h);
        if (max_step_ > 0.0) h = std::min(h, max_step_);
        return std::max(h, 1e-12);
    }

    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

    F f_;
    double rel_tol_, abs_tol_, max_step_;
    double h_ = 0.0;
    Vector k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, next_, err_;
};

template <typename F>
class Rk4 {
public:
    Rk4(F f, Index dim, double max_step)
        : f_(std::move(f)), max_step_(max_step), k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

    void advance(double& t, Vector& x, double t_end) {
        const double span = t_end - t;
        if (span <= 0.0) return;
        const int n = max_step_ > 0.0 ? std::max(1, static_cast<int>(std::ceil(span / max_step_ - 1e-12))) : 1;
        const double h = span / n;
        for (int i = 0; i < n; ++i) {
            f_(x, k1_);
            tmp_ = x + 0.5 * h * k1_;
            f_(tmp_, k2_);
            tmp_ = x + 0.5 * h * k2_;
            f_(tmp_, k3_);
            tmp_ = x + h * k3_;
            f_(tmp_, k4_);
            x += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
            if (blown_up(x)) throw IntegrationBlowup("trajectory diverged", t + i * h);
        }
        t = t_end;
    }

private:
    F f_;
    double max_step_;
    Vector k1_, k2_, k3_, k4_, tmp_;
};

// Dispatches on cfg.scheme and calls `body(stepper)`.
template <typename F, typename Body>
void with_stepper(F f, Index dim, const IntegratorConfig& cfg, Body&& body) {
    if (cfg.scheme == Scheme::fixed_rk4) {
        Rk4<F> stepper(std::move(f), dim, cfg.max_step);
        body(stepper);
    } else {
        DormandPrince<F> stepper(std::move(f), dim, cfg.rel_tol, cfg.abs_tol, cfg.max_step);
        body(stepper);
    }
}

}  // namespace chaosbench::detail
