#include "chaosbench/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace chaosbench {

using nlohmann::json;

namespace {

template <typename T>
const char* type_label() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "a list";
}

// Typed field access that names the offending key and rejects unknown keys.
class FieldReader {
public:
    FieldReader(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
        if (!doc_.is_object()) throw ConfigError(where_.empty() ? "document" : where_, "expected an object");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        if (!doc_.contains(key)) return;
        seen_.insert(key);
        const json& v = doc_.at(key);
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer()) throw ConfigError(path(key), std::string("expected ") + type_label<T>());
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(path(key), std::string("expected ") + type_label<T>());
        }
        try {
            out = v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path(key), std::string("expected ") + type_label<T>());
        }
    }

    const json* child(const std::string& key) {
        if (!doc_.contains(key)) return nullptr;
        seen_.insert(key);
        return &doc_.at(key);
    }

    std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path(it.key()), "unknown field");
    }

private:
    const json& doc_;
    std::string where_;
    std::set<std::string> seen_;
};

// Rethrows a validation failure as a ConfigError pointing at `where`.
template <typename Fn>
void check(const std::string& where, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(where, e.what());
    }
}

Similarity similarity_from_string(const std::string& s) {
    if (s == "pearson") return Similarity::pearson;
    if (s == "zncc") return Similarity::zncc;
    throw InvalidArgument("similarity must be 'pearson' or 'zncc'");
}

Scheme scheme_from_string(const std::string& s) {
    if (s == "adaptive_rk45") return Scheme::adaptive_rk45;
    if (s == "fixed_rk4") return Scheme::fixed_rk4;
    throw InvalidArgument("scheme must be 'adaptive_rk45' or 'fixed_rk4'");
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_ics < 1) throw ConfigError("n_ics", "must be >= 1");
    if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
    if (context_len < 2) throw ConfigError("context_len", "must be >= 2");
    if (granularity < 1) throw ConfigError("granularity", "must be >= 1");
    if (models.empty()) throw ConfigError("models", "at least one model is required");
    if (tune) {
        if (train_len < 2 || val_len < 1) throw ConfigError("train_len", "split needs train >= 2 and val >= 1");
        if (train_len + val_len != context_len)
            throw ConfigError("train_len", "train_len + val_len must equal context_len when tuning");
        if (lookback_grid.empty()) throw ConfigError("lookback_grid", "must not be empty");
        for (double v : lookback_grid)
            if (!(v > 0.0)) throw ConfigError("lookback_grid", "values must be positive");
    }
    if (!(adapter_timeout > 0.0)) throw ConfigError("adapter_timeout", "must be positive");
    check("nvar", [&] { nvar.validate(); });
    check("parrot", [&] { parrot.validate(); });
    check("metrics", [&] { metrics.validate(); });
    check("integrator", [&] { integrator.validate(); });

    auto list = [&](const char* key) -> const json& {
        if (!kind_params.is_object() || !kind_params.contains(key) || !kind_params.at(key).is_array() ||
            kind_params.at(key).empty())
            throw ConfigError(std::string("kind_params.") + key, "a non-empty list is required for " + to_string(kind));
        return kind_params.at(key);
    };
    switch (kind) {
        case ExperimentKind::baseline:
            break;
        case ExperimentKind::context_sweep:
            for (const auto& c : list("context_lens"))
                if (!c.is_number_integer() || c.get<Index>() < 2)
                    throw ConfigError("kind_params.context_lens", "entries must be integers >= 2");
            break;
        case ExperimentKind::kgram_shuffle:
            for (const auto& k : list("k"))
                if (!k.is_number_integer() || k.get<Index>() < 1 || 2 * k.get<Index>() > context_len)
                    throw ConfigError("kind_params.k", "entries must be integers in [1, context_len/2]");
            break;
        case ExperimentKind::nonstationary:
            for (const auto& f : list("f_min"))
                if (!f.is_number() || !(f.get<double>() > 0.0) || f.get<double>() > 1.0)
                    throw ConfigError("kind_params.f_min", "entries must lie in (0, 1]");
            break;
        case ExperimentKind::ic_dependence:
            if (kind_params.contains("reference_length") &&
                (!kind_params["reference_length"].is_number_integer() || kind_params["reference_length"].get<Index>() < 100))
                throw ConfigError("kind_params.reference_length", "must be an integer >= 100");
            break;
    }
}

json to_json(const ExperimentConfig& c) {
    return {{"systems", c.systems},
            {"n_ics", c.n_ics},
            {"context_len", c.context_len},
            {"horizon", c.horizon},
            {"granularity", c.granularity},
            {"train_len", c.train_len},
            {"val_len", c.val_len},
            {"tune", c.tune},
            {"models", c.models},
            {"mode", to_string(c.mode)},
            {"seed", c.seed},
            {"experiment_kind", to_string(c.kind)},
            {"kind_params", c.kind_params},
            {"lookback_grid", c.lookback_grid},
            {"nvar", {{"n_lags", c.nvar.n_lags}, {"max_order", c.nvar.max_order}, {"ridge", c.nvar.ridge},
                      {"stride", c.nvar.stride}}},
            {"parrot", {{"motif_len", c.parrot.motif_len}, {"rematch_interval", c.parrot.rematch_interval},
                        {"similarity", c.parrot.similarity == Similarity::pearson ? "pearson" : "zncc"}}},
            {"metrics", {{"vpt_epsilon", c.metrics.vpt_epsilon},
                         {"gp_low_percentile", c.metrics.gp_low_percentile},
                         {"gp_high_percentile", c.metrics.gp_high_percentile},
                         {"gp_radii", c.metrics.gp_radii},
                         {"gp_min_points", c.metrics.gp_min_points},
                         {"gp_max_pairs", c.metrics.gp_max_pairs},
                         {"kl_mc_samples", c.metrics.kl_mc_samples},
                         {"kl_bandwidth_floor", c.metrics.kl_bandwidth_floor},
                         {"overlap_min_len", c.metrics.overlap_min_len},
                         {"overlap_max_length", c.metrics.overlap_max_length}}},
            {"integrator", {{"rel_tol", c.integrator.rel_tol}, {"abs_tol", c.integrator.abs_tol},
                            {"max_step", c.integrator.max_step},
                            {"scheme", c.integrator.scheme == Scheme::adaptive_rk45 ? "adaptive_rk45" : "fixed_rk4"}}},
            {"attractor_metrics", c.attractor_metrics},
            {"threads", c.threads},
            {"adapter_timeout", c.adapter_timeout}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c;
    FieldReader r(j, "");
    r.get("systems", c.systems);
    r.get("n_ics", c.n_ics);
    r.get("context_len", c.context_len);
    r.get("horizon", c.horizon);
    r.get("granularity", c.granularity);
    r.get("train_len", c.train_len);
    r.get("val_len", c.val_len);
    if (const json* split = r.child("train_val_split")) {
        if (!split->is_array() || split->size() != 2 || !(*split)[0].is_number_integer() ||
            !(*split)[1].is_number_integer())
            throw ConfigError("train_val_split", "expected [train, val]");
        c.train_len = (*split)[0].get<Index>();
        c.val_len = (*split)[1].get<Index>();
    }
    r.get("tune", c.tune);
    r.get("models", c.models);
    std::string mode = to_string(c.mode);
    r.get("mode", mode);
    check("mode", [&] { c.mode = channel_mode_from_string(mode); });
    r.get("seed", c.seed);
    std::string kind = to_string(c.kind);
    r.get("experiment_kind", kind);
    check("experiment_kind", [&] { c.kind = experiment_kind_from_string(kind); });
    if (const json* kp = r.child("kind_params")) {
        if (!kp->is_object()) throw ConfigError("kind_params", "expected an object");
        c.kind_params = *kp;
    }
    r.get("lookback_grid", c.lookback_grid);

    if (const json* n = r.child("nvar")) {
        FieldReader s(*n, "nvar");
        s.get("n_lags", c.nvar.n_lags);
        s.get("max_order", c.nvar.max_order);
        s.get("ridge", c.nvar.ridge);
        s.get("stride", c.nvar.stride);
        s.finish();
    }
    if (const json* p = r.child("parrot")) {
        FieldReader s(*p, "parrot");
        s.get("motif_len", c.parrot.motif_len);
        s.get("rematch_interval", c.parrot.rematch_interval);
        std::string sim = "pearson";
        s.get("similarity", sim);
        check("parrot.similarity", [&] { c.parrot.similarity = similarity_from_string(sim); });
        s.finish();
    }
    if (const json* m = r.child("metrics")) {
        FieldReader s(*m, "metrics");
        s.get("vpt_epsilon", c.metrics.vpt_epsilon);
        s.get("gp_low_percentile", c.metrics.gp_low_percentile);
        s.get("gp_high_percentile", c.metrics.gp_high_percentile);
        s.get("gp_radii", c.metrics.gp_radii);
        s.get("gp_min_points", c.metrics.gp_min_points);
        s.get("gp_max_pairs", c.metrics.gp_max_pairs);
        s.get("kl_mc_samples", c.metrics.kl_mc_samples);
        s.get("kl_bandwidth_floor", c.metrics.kl_bandwidth_floor);
        s.get("overlap_min_len", c.metrics.overlap_min_len);
        s.get("overlap_max_length", c.metrics.overlap_max_length);
        s.finish();
    }
    if (const json* g = r.child("integrator")) {
        FieldReader s(*g, "integrator");
        s.get("rel_tol", c.integrator.rel_tol);
        s.get("abs_tol", c.integrator.abs_tol);
        s.get("max_step", c.integrator.max_step);
        std::string scheme = "adaptive_rk45";
        s.get("scheme", scheme);
        check("integrator.scheme", [&] { c.integrator.scheme = scheme_from_string(scheme); });
        s.finish();
    }
    r.get("attractor_metrics", c.attractor_metrics);
    r.get("threads", c.threads);
    r.get("adapter_timeout", c.adapter_timeout);
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig experiment_config_from_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw ConfigError("line " + std::to_string(line), e.what());
    }
    return experiment_config_from_json(doc);
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    return experiment_config_from_text(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
    json j = to_json(cfg);
    j.erase("threads");
    return canonical_hash(j);
}

}  // namespace chaosbench
