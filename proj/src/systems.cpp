#include "chaosbench/systems.hpp"

#include <cmath>
#include <limits>

namespace chaosbench {

namespace {

struct Family {
    int dim;
    std::vector<std::pair<std::string, double>> defaults;
    // Builds the field from parameters in `defaults` order.
    std::function<FieldFn(const std::vector<double>&)> bind;
};

const std::map<std::string, Family>& families() {
    static const std::map<std::string, Family> table = [] {
        std::map<std::string, Family> t;
        t["lorenz"] = {3, {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
                       [](const std::vector<double>& p) -> FieldFn {
                           const double sigma = p[0], rho = p[1], beta = p[2];
                           return [=](const auto& s, auto out) {
                               out(0) = sigma * (s(1) - s(0));
                               out(1) = s(0) * (rho - s(2)) - s(1);
                               out(2) = s(0) * s(1) - beta * s(2);
                           };
                       }};
        t["rossler"] = {3, {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}},
                        [](const std::vector<double>& p) -> FieldFn {
                            const double a = p[0], b = p[1], c = p[2];
                            return [=](const auto& s, auto out) {
                                out(0) = -s(1) - s(2);
                                out(1) = s(0) + a * s(1);
                                out(2) = b + s(2) * (s(0) - c);
                            };
                        }};
        t["chen"] = {3, {{"a", 35.0}, {"b", 3.0}, {"c", 28.0}},
                     [](const std::vector<double>& p) -> FieldFn {
                         const double a = p[0], b = p[1], c = p[2];
                         return [=](const auto& s, auto out) {
                             out(0) = a * (s(1) - s(0));
                             out(1) = (c - a) * s(0) - s(0) * s(2) + c * s(1);
                             out(2) = s(0) * s(1) - b * s(2);
                         };
                     }};
        t["lu"] = {3, {{"a", 36.0}, {"b", 3.0}, {"c", 20.0}},
                   [](const std::vector<double>& p) -> FieldFn {
                       const double a = p[0], b = p[1], c = p[2];
                       return [=](const auto& s, auto out) {
                           out(0) = a * (s(1) - s(0));
                           out(1) = -s(0) * s(2) + c * s(1);
                           out(2) = s(0) * s(1) - b * s(2);
                       };
                   }};
        t["halvorsen"] = {3, {{"a", 1.89}},
                          [](const std::vector<double>& p) -> FieldFn {
                              const double a = p[0];
                              return [=](const auto& s, auto out) {
                                  out(0) = -a * s(0) - 4.0 * s(1) - 4.0 * s(2) - s(1) * s(1);
                                  out(1) = -a * s(1) - 4.0 * s(2) - 4.0 * s(0) - s(2) * s(2);
                                  out(2) = -a * s(2) - 4.0 * s(0) - 4.0 * s(1) - s(0) * s(0);
                              };
                          }};
        t["thomas"] = {3, {{"b", 0.208186}},
                       [](const std::vector<double>& p) -> FieldFn {
                           const double b = p[0];
                           return [=](const auto& s, auto out) {
                               out(0) = std::sin(s(1)) - b * s(0);
                               out(1) = std::sin(s(2)) - b * s(1);
                               out(2) = std::sin(s(0)) - b * s(2);
                           };
                       }};
        t["sprott_b"] = {3, {{"a", 1.0}},
                         [](const std::vector<double>& p) -> FieldFn {
                             const double a = p[0];
                             return [=](const auto& s, auto out) {
                                 out(0) = a * s(1) * s(2);
                                 out(1) = s(0) - s(1);
                                 out(2) = 1.0 - s(0) * s(1);
                             };
                         }};
        t["rucklidge"] = {3, {{"k", 2.0}, {"lambda", 6.7}},
                          [](const std::vector<double>& p) -> FieldFn {
                              const double k = p[0], lam = p[1];
                              return [=](const auto& s, auto out) {
                                  out(0) = -k * s(0) + lam * s(1) - s(1) * s(2);
                                  out(1) = s(0);
                                  out(2) = -s(2) + s(1) * s(1);
                              };
                          }};
        t["aizawa"] = {3,
                       {{"a", 0.95}, {"b", 0.7}, {"c", 0.6}, {"d", 3.5}, {"e", 0.25}, {"f", 0.1}},
                       [](const std::vector<double>& p) -> FieldFn {
                           const double a = p[0], b = p[1], c = p[2], d = p[3], e = p[4],
                                        f = p[5];
                           return [=](const auto& s, auto out) {
                               const double x = s(0), y = s(1), z = s(2);
                               out(0) = (z - b) * x - d * y;
                               out(1) = d * x + (z - b) * y;
                               out(2) = c + a * z - z * z * z / 3.0 - (x * x + y * y) * (1.0 + e * z) +
                                        f * z * x * x * x;
                           };
                       }};
        t["genesio_tesi"] = {3, {{"a", 0.44}, {"b", 1.1}, {"c", 1.0}},
                             [](const std::vector<double>& p) -> FieldFn {
                                 const double a = p[0], b = p[1], c = p[2];
                                 return [=](const auto& s, auto out) {
                                     out(0) = s(1);
                                     out(1) = s(2);
                                     out(2) = -c * s(0) - b * s(1) - a * s(2) + s(0) * s(0);
                                 };
                             }};
        t["shimizu_morioka"] = {3, {{"a", 0.75}, {"b", 0.45}},
                                [](const std::vector<double>& p) -> FieldFn {
                                    const double a = p[0], b = p[1];
                                    return [=](const auto& s, auto out) {
                                        out(0) = s(1);
                                        out(1) = s(0) - a * s(1) - s(0) * s(2);
                                        out(2) = -b * s(2) + s(0) * s(0);
                                    };
                                }};
        t["dadras"] = {3, {{"a", 3.0}, {"b", 2.7}, {"c", 1.7}, {"d", 2.0}, {"e", 9.0}},
                       [](const std::vector<double>& p) -> FieldFn {
                           const double a = p[0], b = p[1], c = p[2], d = p[3], e = p[4];
                           return [=](const auto& s, auto out) {
                               out(0) = s(1) - a * s(0) + b * s(1) * s(2);
                               out(1) = c * s(1) - s(0) * s(2) + s(2);
                               out(2) = d * s(0) * s(1) - e * s(2);
                           };
                       }};
        t["arneodo"] = {3, {{"a", -5.5}, {"b", 3.5}, {"c", 1.0}, {"d", -1.0}},
                        [](const std::vector<double>& p) -> FieldFn {
                            const double a = p[0], b = p[1], c = p[2], d = p[3];
                            return [=](const auto& s, auto out) {
                                out(0) = s(1);
                                out(1) = s(2);
                                out(2) = -a * s(0) - b * s(1) - c * s(2) + d * s(0) * s(0) * s(0);
                            };
                        }};
        t["chen_lee"] = {3, {{"a", 5.0}, {"b", -10.0}, {"c", -0.38}},
                         [](const std::vector<double>& p) -> FieldFn {
                             const double a = p[0], b = p[1], c = p[2];
                             return [=](const auto& s, auto out) {
                                 out(0) = a * s(0) - s(1) * s(2);
                                 out(1) = b * s(1) + s(0) * s(2);
                                 out(2) = c * s(2) + s(0) * s(1) / 3.0;
                             };
                         }};
        t["burke_shaw"] = {3, {{"s", 10.0}, {"v", 4.272}},
                           [](const std::vector<double>& p) -> FieldFn {
                               const double sc = p[0], v = p[1];
                               return [=](const auto& s, auto out) {
                                   out(0) = -sc * (s(0) + s(1));
                                   out(1) = -s(1) - sc * s(0) * s(2);
                                   out(2) = sc * s(0) * s(1) + v;
                               };
                           }};
        // Test system: circular orbits, zero Lyapunov exponent.
        t["harmonic_oscillator"] = {2, {{"omega", 1.0}},
                                    [](const std::vector<double>& p) -> FieldFn {
                                        const double w = p[0];
                                        return [=](const auto& s, auto out) {
                                            out(0) = w * s(1);
                                            out(1) = -w * s(0);
                                        };
                                    }};
        return t;
    }();
    return table;
}

const Family& find_family(const std::string& family) {
    const auto& t = families();
    auto it = t.find(family);
    if (it == t.end()) throw InvalidArgument("unknown system family '" + family + "'");
    return it->second;
}

}  // namespace

double SystemSpec::lyapunov_time() const {
    return lyapunov_exponent > 0.0 ? 1.0 / lyapunov_exponent
                                   : std::numeric_limits<double>::infinity();
}

void IntegratorConfig::validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
        throw InvalidArgument("integrator tolerances must be positive");
    if (max_step < 0.0) throw InvalidArgument("max_step must be non-negative");
}

void Trajectory::validate() const {
    if (values.rows() < 2) throw InvalidArgument("trajectory needs at least 2 samples");
    if (!(dt_lyap > 0.0)) throw InvalidArgument("trajectory dt_lyap must be positive");
    if (!values.allFinite()) throw InvalidArgument("trajectory contains non-finite values");
}

std::vector<std::string> known_families() {
    std::vector<std::string> names;
    for (const auto& [name, _] : families()) names.push_back(name);
    return names;
}

std::map<std::string, double> family_defaults(const std::string& family) {
    const auto& f = find_family(family);
    return {f.defaults.begin(), f.defaults.end()};
}

int family_dim(const std::string& family) { return find_family(family).dim; }

SystemSpec make_system(std::string name, const std::string& family,
                       std::map<std::string, double> params) {
    const auto& f = find_family(family);
    std::vector<double> ordered;
    ordered.reserve(f.defaults.size());
    for (const auto& [key, value] : f.defaults) {
        auto it = params.find(key);
        ordered.push_back(it == params.end() ? value : it->second);
    }
    for (const auto& [key, _] : params) {
        bool known = false;
        for (const auto& d : f.defaults) known = known || d.first == key;
        if (!known)
            throw InvalidArgument("family '" + family + "' has no parameter '" + key + "'");
    }

    SystemSpec spec;
    spec.name = std::move(name);
    spec.family = family;
    spec.dim = f.dim;
    for (std::size_t i = 0; i < ordered.size(); ++i) spec.params[f.defaults[i].first] = ordered[i];
    spec.field = f.bind(ordered);
    spec.initial_state = Vector::Constant(f.dim, 0.1);
    spec.integration_dt = 0.01;
    return spec;
}

Vector vector_field(const SystemSpec& spec, const Eigen::Ref<const Vector>& state) {
    if (!spec.registered()) throw InvalidArgument("system '" + spec.name + "' has no vector field");
    if (state.size() != spec.dim)
        throw InvalidArgument("state dimension " + std::to_string(state.size()) +
                              " does not match system dimension " + std::to_string(spec.dim));
    Vector out(spec.dim);
    spec.field(state, out);
    return out;
}

}  // namespace chaosbench
