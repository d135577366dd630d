#pragma once

#include "chaosbench/errors.hpp"
#include "chaosbench/types.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chaosbench {

// Right-hand side of an autonomous ODE, dx/dt = f(x). Writes into `out`.
using FieldFn = std::function<void(const Eigen::Ref<const Vector>& state, Eigen::Ref<Vector> out)>;

/// A named autonomous flow together with the annotations the benchmark needs.
///
/// `family` selects one of the built-in vector fields (see `known_families()`);
/// `params` are its named coefficients. The bound field is rebuilt from
/// (family, params) by `make_system`, so a SystemSpec read from a registry file
/// is fully usable.
struct SystemSpec {
    std::string name;
    std::string family;
    int dim = 0;
    std::map<std::string, double> params;
    double lyapunov_exponent = 0.0;  // 1/time
    double reference_fractal_dim = 0.0;
    double integration_dt = 0.0;  // raw output grid, time units
    double burn_in_time = 0.0;    // time units
    Vector initial_state;         // canonical seed point for IC sampling
    bool chaotic = true;
    std::string provenance;

    FieldFn field;

    // τ = 1/λ; infinite for non-chaotic flows.
    double lyapunov_time() const;
    bool registered() const noexcept { return static_cast<bool>(field); }
};

enum class Scheme { adaptive_rk45, fixed_rk4 };

struct IntegratorConfig {
    double rel_tol = 1e-9;
    double abs_tol = 1e-12;
    double max_step = 0.0;  // 0 → no cap beyond the output grid spacing
    Scheme scheme = Scheme::adaptive_rk45;

    void validate() const;
};

/// Uniformly sampled multivariate series, rows are time.
///
/// `dt` is the spacing in the system's time units and `dt_lyap` the same
/// spacing in Lyapunov times. For flows without a positive exponent the two
/// coincide (τ is taken as one time unit).
struct Trajectory {
    Matrix values;
    double dt = 0.0;
    double dt_lyap = 0.0;
    double t0 = 0.0;  // Lyapunov times
    std::optional<std::string> system;

    Index length() const noexcept { return values.rows(); }
    Index dim() const noexcept { return values.cols(); }
    void validate() const;
};

// Builds a SystemSpec with a bound vector field. Missing parameters fall back
// to the family defaults; unknown families raise InvalidArgument.
SystemSpec make_system(std::string name, const std::string& family,
                       std::map<std::string, double> params = {});

std::vector<std::string> known_families();
std::map<std::string, double> family_defaults(const std::string& family);
int family_dim(const std::string& family);

Vector vector_field(const SystemSpec& spec, const Eigen::Ref<const Vector>& state);

/// Integrates from x0 for `duration` time units. Samples lie on the grid
/// t_k = k·h, k = 0..n−1 with h = spec.integration_dt (capped by max_step)
/// and n = max(1, round(duration/h)); the last sample sits at (n−1)·h.
Trajectory integrate(const SystemSpec& spec, const Eigen::Ref<const Vector>& x0,
                     double duration, const IntegratorConfig& cfg = {});

/// Cubic (4-point Lagrange) interpolation onto a grid with
/// 1/points_per_lyapunov spacing. Integer decimation ratios copy samples.
Trajectory resample(const Trajectory& raw, double lyapunov_exponent,
                    int points_per_lyapunov = 30);

struct LyapunovEstimate {
    double exponent = 0.0;
    double standard_error = 0.0;
};

LyapunovEstimate estimate_lyapunov(const SystemSpec& spec, const IntegratorConfig& cfg,
                                   double horizon, Seed seed);

/// On-attractor states: the canonical point perturbed by uniform noise of 1%
/// of the attractor extent, then integrated for burn_in_time. Returns n × dim.
Matrix sample_initial_conditions(const SystemSpec& spec, int n, const IntegratorConfig& cfg,
                                 Seed seed);

// Axis-aligned extent of a long orbit started from the canonical point.
Vector attractor_extent(const SystemSpec& spec, const IntegratorConfig& cfg);

/// Benchmark-ready trajectory: `length` samples at `points_per_lyapunov`
/// starting from an on-attractor state x0.
Trajectory generate_trajectory(const SystemSpec& spec, const Eigen::Ref<const Vector>& x0,
                               Index length, int points_per_lyapunov,
                               const IntegratorConfig& cfg = {});

// ---------------------------------------------------------------------------
// Registry

class Registry {
public:
    Registry() = default;
    explicit Registry(std::vector<SystemSpec> systems);

    static Registry load(const std::string& path);
    static Registry from_json_text(const std::string& text);
    // Path from $CHAOSBENCH_REGISTRY, else the bundled data file.
    static std::string default_path();

    const SystemSpec& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    const std::vector<SystemSpec>& systems() const noexcept { return systems_; }
    std::vector<std::string> chaotic_names() const;
    // FNV-1a over the canonical serialization.
    std::string checksum() const;
    std::string to_json_text() const;

private:
    std::vector<SystemSpec> systems_;
};

}  // namespace chaosbench
