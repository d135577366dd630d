#include "chaosbench/experiments.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

namespace chaosbench {

using nlohmann::json;

namespace {

std::vector<std::pair<std::string, double>> metric_values(const ResultRecord& r) {
    std::vector<std::pair<std::string, double>> out;
    out.emplace_back("vpt_lyap", r.metrics.vpt_lyap);
    if (r.metrics.smape_curve.size() > 0) out.emplace_back("smape_mean", r.metrics.smape_curve.mean());
    if (r.metrics.d_frac_error) out.emplace_back("d_frac_error", *r.metrics.d_frac_error);
    if (r.metrics.d_stsp) out.emplace_back("d_stsp", *r.metrics.d_stsp);
    if (r.metrics.context_overlap) out.emplace_back("context_overlap", *r.metrics.context_overlap);
    return out;
}

// Insertion-ordered grouping.
template <typename Key>
struct Groups {
    std::vector<Key> keys;
    std::map<Key, std::vector<const ResultRecord*>> members;

    void add(const Key& k, const ResultRecord* r) {
        auto [it, inserted] = members.try_emplace(k);
        if (inserted) keys.push_back(k);
        it->second.push_back(r);
    }
};

double median_vpt(const std::vector<const ResultRecord*>& rs) {
    std::vector<double> v;
    for (const auto* r : rs)
        if (r->ok()) v.push_back(r->metrics.vpt_lyap);
    return v.empty() ? std::numeric_limits<double>::quiet_NaN() : median(std::move(v));
}

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json trend(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isfinite(y[i])) {
            xs.push_back(x[i]);
            ys.push_back(y[i]);
        }
    if (xs.size() < 3) return nullptr;
    try {
        return spearman(Eigen::Map<const Vector>(xs.data(), static_cast<Index>(xs.size())),
                        Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size())));
    } catch (const UndefinedCorrelation&) {
        return nullptr;
    }
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("median of an empty set");
    const std::size_t n = values.size();
    auto mid = values.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (n % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(values.begin(), mid);
    return 0.5 * (lower + upper);
}

double bootstrap_median_se(const std::vector<double>& values, int resamples, Seed seed) {
    if (values.size() < 2 || resamples < 2) return 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
    std::vector<double> draw(values.size()), medians;
    medians.reserve(static_cast<std::size_t>(resamples));
    for (int b = 0; b < resamples; ++b) {
        for (auto& x : draw) x = values[pick(rng)];
        medians.push_back(median(draw));
    }
    const double mean = std::accumulate(medians.begin(), medians.end(), 0.0) / resamples;
    double ss = 0.0;
    for (double m : medians) ss += (m - mean) * (m - mean);
    return std::sqrt(ss / (resamples - 1));
}

CorrelationTest spearman_permutation(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b,
                                     int permutations, Seed seed) {
    if (a.size() != b.size()) throw InvalidArgument("spearman_permutation: size mismatch");
    CorrelationTest out;
    out.n = static_cast<std::size_t>(a.size());
    if (a.size() < 3) return out;
    const Vector ra = fractional_ranks(a), rb = fractional_ranks(b);
    const auto rho = pearson(ra, rb);
    if (!rho) return out;
    out.rho = *rho;

    std::mt19937_64 rng(seed);
    Vector perm = rb;
    int ge = 0, le = 0;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(perm.data(), perm.data() + perm.size(), rng);
        const double r = *pearson(ra, perm);
        if (r >= *rho - 1e-12) ++ge;
        if (r <= *rho + 1e-12) ++le;
    }
    out.p_greater = (1.0 + ge) / (1.0 + permutations);
    out.p_less = (1.0 + le) / (1.0 + permutations);
    return out;
}

PairedTest paired_permutation(const std::vector<double>& a, const std::vector<double>& b, int permutations,
                              Seed seed) {
    if (a.size() != b.size()) throw InvalidArgument("paired_permutation: size mismatch");
    PairedTest out;
    out.n = a.size();
    if (a.empty()) return out;
    std::vector<double> diff(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
    const double n = static_cast<double>(diff.size());
    out.mean_difference = std::accumulate(diff.begin(), diff.end(), 0.0) / n;

    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(0.5);
    int ge = 0;
    for (int p = 0; p < permutations; ++p) {
        double s = 0.0;
        for (double d : diff) s += flip(rng) ? -d : d;
        if (s / n >= out.mean_difference - 1e-12) ++ge;
    }
    out.p_greater = (1.0 + ge) / (1.0 + permutations);
    return out;
}

std::string record_key(const ResultRecord& r, const std::string& path) {
    const json j = to_json(r);
    const json* node = &j;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = path.find('.', start);
        const std::string part = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) return "";
        node = &node->at(part);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node->is_string() ? node->get<std::string>() : node->dump();
}

SummaryTable aggregate(const std::vector<ResultRecord>& records, const std::vector<std::string>& group_keys,
                       Seed seed, int resamples) {
    if (records.empty()) throw InvalidArgument("aggregate: no records");
    SummaryTable table;
    table.group_keys = group_keys;

    Groups<std::vector<std::string>> groups;
    for (const auto& r : records) {
        std::vector<std::string> key;
        for (const auto& k : group_keys) key.push_back(record_key(r, k));
        groups.add(key, &r);
    }

    std::uint64_t gi = 0;
    for (const auto& key : groups.keys) {
        const auto& members = groups.members.at(key);
        SummaryRow row;
        row.key = key;
        std::map<std::string, std::vector<double>> values;
        std::vector<const Vector*> curves;
        for (const auto* r : members) {
            if (!r->ok()) {
                ++row.n_failed;
                continue;
            }
            ++row.n_ok;
            for (const auto& [name, v] : metric_values(*r)) values[name].push_back(v);
            if (r->metrics.smape_curve.size() > 0) curves.push_back(&r->metrics.smape_curve);
        }
        ++gi;
        if (row.n_ok == 0) {
            std::string label;
            for (const auto& k : key) label += (label.empty() ? "" : ",") + k;
            table.warnings.push_back("group (" + label + ") has no successful records; omitted (" +
                                     std::to_string(row.n_failed) + " failed)");
            continue;
        }
        std::uint64_t mi = 0;
        for (auto& [name, v] : values) {
            MetricSummary s;
            s.n = v.size();
            s.median = median(v);
            s.standard_error = bootstrap_median_se(v, resamples, derive_seed(seed, gi, ++mi));
            row.metrics[name] = s;
        }
        // Pointwise median over records sharing the shortest common horizon.
        if (!curves.empty()) {
            Index h = curves.front()->size();
            for (const auto* c : curves) h = std::min(h, c->size());
            row.median_smape_curve.resize(h);
            std::vector<double> column(curves.size());
            for (Index t = 0; t < h; ++t) {
                for (std::size_t i = 0; i < curves.size(); ++i) column[i] = (*curves[i])(t);
                row.median_smape_curve(t) = median(column);
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

json summarize(const std::vector<ResultRecord>& records, Seed seed) {
    json out = json::object();
    if (records.empty()) return out;

    Groups<std::string> by_model;
    std::set<std::string> kinds;
    for (const auto& r : records) {
        by_model.add(r.model_id, &r);
        kinds.insert(r.experiment_kind);
    }
    out["records"] = records.size();
    out["experiment_kinds"] = kinds;

    json models = json::object();
    for (const auto& m : by_model.keys) {
        const auto& rs = by_model.members.at(m);
        const auto failed = static_cast<std::size_t>(
            std::count_if(rs.begin(), rs.end(), [](const ResultRecord* r) { return !r->ok(); }));
        models[m] = {{"median_vpt", nan_safe(median_vpt(rs))}, {"n_ok", rs.size() - failed}, {"n_failed", failed}};
    }
    out["models"] = models;

    const std::string kind = records.front().experiment_kind;

    if (kind == "baseline" && by_model.members.count("naive")) {
        // Paired VPT comparison of every model against the naive baseline.
        std::map<std::tuple<std::string, int, int>, double> naive;
        for (const auto* r : by_model.members.at("naive"))
            if (r->ok()) naive[{r->system, r->ic_index, r->channel}] = r->metrics.vpt_lyap;
        json paired = json::object();
        std::uint64_t mi = 0;
        for (const auto& m : by_model.keys) {
            if (m == "naive") continue;
            std::vector<double> a, b;
            for (const auto* r : by_model.members.at(m)) {
                auto it = naive.find({r->system, r->ic_index, r->channel});
                if (r->ok() && it != naive.end()) {
                    a.push_back(r->metrics.vpt_lyap);
                    b.push_back(it->second);
                }
            }
            const PairedTest t = paired_permutation(a, b, 10000, derive_seed(seed, 7, ++mi));
            paired[m] = {{"n", t.n}, {"mean_difference", t.mean_difference}, {"p_greater", t.p_greater}};
        }
        out["paired_vs_naive"] = paired;
    }

    auto knob_table = [&](const char* knob, bool invert) {
        json per_model = json::object();
        for (const auto& m : by_model.keys) {
            Groups<double> by_knob;
            for (const auto* r : by_model.members.at(m))
                if (r->kind_params.contains(knob)) by_knob.add(r->kind_params.at(knob).get<double>(), r);
            std::vector<double> x, y;
            json rows = json::array();
            for (double k : by_knob.keys) {
                const double med = median_vpt(by_knob.members.at(k));
                rows.push_back({{knob, k}, {"median_vpt", nan_safe(med)}, {"n", by_knob.members.at(k).size()}});
                x.push_back(invert ? 1.0 - k : k);
                y.push_back(med);
            }
            per_model[m] = {{"by_" + std::string(knob), rows}, {"spearman", trend(x, y)}};
        }
        return per_model;
    };

    if (kind == "context_sweep") out["context_sweep"] = knob_table("context_len", false);
    if (kind == "nonstationary") out["nonstationary"] = knob_table("f_min", true);

    if (kind == "kgram_shuffle") {
        json per_model = json::object();
        for (const auto& m : by_model.keys) {
            Groups<std::pair<int, std::string>> cells;
            std::vector<int> ks;
            for (const auto* r : by_model.members.at(m)) {
                const int k = r->kind_params.value("k", 0);
                if (std::find(ks.begin(), ks.end(), k) == ks.end()) ks.push_back(k);
                cells.add({k, r->kind_params.value("condition", "")}, r);
            }
            json rows = json::array();
            for (int k : ks) {
                json row = {{"k", k}};
                for (const char* cond : {"shuffled", "truncated"}) {
                    auto it = cells.members.find({k, cond});
                    row[std::string(cond) + "_median_vpt"] =
                        it == cells.members.end() ? json(nullptr) : nan_safe(median_vpt(it->second));
                }
                rows.push_back(row);
            }
            per_model[m] = rows;
        }
        out["kgram_shuffle"] = per_model;
    }

    if (kind == "ic_dependence") {
        json per_model = json::object();
        std::uint64_t mi = 0;
        for (const auto& m : by_model.keys) {
            // One pair per (system, ic): channel-mean VPT against relative density.
            Groups<std::pair<std::string, int>> per_ic;
            for (const auto* r : by_model.members.at(m))
                if (r->ok()) per_ic.add({r->system, r->ic_index}, r);
            std::vector<double> vpts, dens;
            json pairs = json::array();
            for (const auto& key : per_ic.keys) {
                const auto& rs = per_ic.members.at(key);
                double v = 0.0;
                for (const auto* r : rs) v += r->metrics.vpt_lyap;
                v /= static_cast<double>(rs.size());
                const double d = rs.front()->analysis.value("relative_density", 0.0);
                vpts.push_back(v);
                dens.push_back(d);
                pairs.push_back({{"system", key.first}, {"ic_index", key.second}, {"vpt_lyap", v},
                                 {"relative_density", d}});
            }
            const CorrelationTest t =
                spearman_permutation(Eigen::Map<const Vector>(dens.data(), static_cast<Index>(dens.size())),
                                     Eigen::Map<const Vector>(vpts.data(), static_cast<Index>(vpts.size())), 10000,
                                     derive_seed(seed, 11, ++mi));
            per_model[m] = {{"pairs", pairs},
                            {"n", t.n},
                            {"spearman", t.rho ? json(*t.rho) : json(nullptr)},
                            {"p_greater", t.p_greater},
                            {"p_less", t.p_less}};
        }
        out["ic_dependence"] = per_model;
    }
    return out;
}

}  // namespace chaosbench
