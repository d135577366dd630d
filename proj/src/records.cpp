#include "chaosbench/records.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace chaosbench {

using nlohmann::json;

namespace {

const char* const kKnownKeys[] = {"schema_version", "harness_version", "system",        "ic_index",
                                  "channel",        "model_id",        "experiment_kind", "kind_params",
                                  "mode",           "metrics",         "walltimes",     "seed",
                                  "status",         "failure_reason",  "forecast_meta", "analysis",
                                  "timestamp"};

json optional_json(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

std::optional<double> optional_from(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

// Generic JSON parsing of the 300-number sMAPE curve dominates load time. Cut
// the array out of the line and read it with from_chars (exact round trip);
// false leaves the line untouched for the generic parser.
bool extract_curve(std::string& line, std::vector<double>& out) {
    static const std::string key = "\"smape_curve\":[";
    const auto start = line.find(key);
    if (start == std::string::npos || line.find(key, start + 1) != std::string::npos) return false;
    const auto open = start + key.size();
    const auto close = line.find(']', open);
    if (close == std::string::npos) return false;
    out.clear();
    const char* p = line.data() + open;
    const char* end = line.data() + close;
    while (p < end) {
        double v = 0.0;
        const auto [next, ec] = std::from_chars(p, end, v);
        if (ec != std::errc()) return false;
        out.push_back(v);
        p = next;
        if (p < end && *p++ != ',') return false;
    }
    line.erase(open, close - open);
    return true;
}

}  // namespace

std::string harness_version() { return CHAOSBENCH_VERSION; }

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json to_json(const ResultRecord& r) {
    json j = r.unknown.is_object() ? r.unknown : json::object();
    j["schema_version"] = kRecordSchemaVersion;
    j["harness_version"] = r.harness_version.empty() ? harness_version() : r.harness_version;
    j["system"] = r.system;
    j["ic_index"] = r.ic_index;
    j["channel"] = r.channel;
    j["model_id"] = r.model_id;
    j["experiment_kind"] = r.experiment_kind;
    j["kind_params"] = r.kind_params;
    j["mode"] = r.mode;
    j["seed"] = r.seed;
    j["status"] = r.status;
    if (!r.failure_reason.empty()) j["failure_reason"] = r.failure_reason;

    json m;
    m["smape_curve"] = std::vector<double>(r.metrics.smape_curve.data(),
                                           r.metrics.smape_curve.data() + r.metrics.smape_curve.size());
    m["vpt_lyap"] = r.metrics.vpt_lyap;
    m["d_frac_pred"] = optional_json(r.metrics.d_frac_pred);
    m["d_frac_error"] = optional_json(r.metrics.d_frac_error);
    m["d_stsp"] = optional_json(r.metrics.d_stsp);
    m["d_stsp_se"] = optional_json(r.metrics.d_stsp_se);
    m["context_overlap"] = optional_json(r.metrics.context_overlap);
    j["metrics"] = m;

    j["walltimes"] = {{"tune", r.walltimes.tune}, {"fit", r.walltimes.fit}, {"inference", r.walltimes.inference}};
    j["forecast_meta"] = r.forecast_meta;
    j["analysis"] = r.analysis;
    j["timestamp"] = r.timestamp;
    return j;
}

ResultRecord record_from_json(const json& j) {
    const int version = j.value("schema_version", -1);
    if (version != kRecordSchemaVersion)
        throw SchemaMismatch("record schema version " + std::to_string(version) + " needs migration to version " +
                             std::to_string(kRecordSchemaVersion));
    ResultRecord r;
    r.harness_version = j.value("harness_version", "");
    r.system = j.at("system").get<std::string>();
    r.ic_index = j.at("ic_index").get<int>();
    r.channel = j.at("channel").get<int>();
    r.model_id = j.at("model_id").get<std::string>();
    r.experiment_kind = j.at("experiment_kind").get<std::string>();
    r.kind_params = j.value("kind_params", json::object());
    r.mode = j.value("mode", "channel_independent");
    r.seed = j.value("seed", Seed{0});
    r.status = j.value("status", "ok");
    r.failure_reason = j.value("failure_reason", "");
    r.forecast_meta = j.value("forecast_meta", json::object());
    r.analysis = j.value("analysis", json::object());
    r.timestamp = j.value("timestamp", "");

    const json& m = j.at("metrics");
    const auto curve = m.value("smape_curve", std::vector<double>{});
    r.metrics.smape_curve = Eigen::Map<const Vector>(curve.data(), static_cast<Index>(curve.size()));
    r.metrics.vpt_lyap = m.value("vpt_lyap", 0.0);
    r.metrics.d_frac_pred = optional_from(m, "d_frac_pred");
    r.metrics.d_frac_error = optional_from(m, "d_frac_error");
    r.metrics.d_stsp = optional_from(m, "d_stsp");
    r.metrics.d_stsp_se = optional_from(m, "d_stsp_se");
    r.metrics.context_overlap = optional_from(m, "context_overlap");

    if (j.contains("walltimes")) {
        const json& w = j.at("walltimes");
        r.walltimes = {w.value("tune", 0.0), w.value("fit", 0.0), w.value("inference", 0.0)};
    }

    r.unknown = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : kKnownKeys) known = known || it.key() == k;
        if (!known) r.unknown[it.key()] = it.value();
    }
    return r;
}

std::string record_payload(const ResultRecord& r) {
    json j = to_json(r);
    j.erase("timestamp");
    j.erase("walltimes");
    if (j.contains("forecast_meta") && j["forecast_meta"].is_object()) {
        j["forecast_meta"].erase("fit_walltime");
        j["forecast_meta"].erase("inference_walltime");
    }
    return j.dump();
}

LoadResult parse_records(std::istream& in) {
    LoadResult out;
    std::string line;
    std::vector<double> curve;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const bool fast = extract_curve(line, curve);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            ++out.corrupt_lines;
            continue;
        }
        if (!j.is_object()) {
            ++out.corrupt_lines;
            continue;
        }
        try {
            out.records.push_back(record_from_json(j));
            if (fast)
                out.records.back().metrics.smape_curve =
                    Eigen::Map<const Vector>(curve.data(), static_cast<Index>(curve.size()));
        } catch (const SchemaMismatch&) {
            throw;
        } catch (const json::exception&) {
            ++out.corrupt_lines;
        }
    }
    return out;
}

LoadResult load_records(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open record file " + path);
    return parse_records(in);
}

RecordAppender::RecordAppender(const std::string& path) : out_(path, std::ios::app) {
    if (!out_) throw InvalidArgument("cannot open " + path + " for appending");
}

void RecordAppender::append(const ResultRecord& r) {
    const std::string line = to_json(r).dump();
    std::lock_guard lock(mutex_);
    out_ << line << '\n';
    out_.flush();
    ++written_;
}

std::size_t RecordAppender::written() const {
    std::lock_guard lock(mutex_);
    return written_;
}

json to_json(const RunManifest& m) {
    return {{"config_hash", m.config_hash},         {"harness_version", m.harness_version},
            {"registry_checksum", m.registry_checksum}, {"master_seed", m.master_seed},
            {"start_time", m.start_time},           {"end_time", m.end_time},
            {"record_count", m.record_count},       {"success_count", m.success_count},
            {"failure_count", m.failure_count},     {"summary", m.summary}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.config_hash = j.value("config_hash", "");
    m.harness_version = j.value("harness_version", "");
    m.registry_checksum = j.value("registry_checksum", "");
    m.master_seed = j.value("master_seed", Seed{0});
    m.start_time = j.value("start_time", "");
    m.end_time = j.value("end_time", "");
    m.record_count = j.value("record_count", std::size_t{0});
    m.success_count = j.value("success_count", std::size_t{0});
    m.failure_count = j.value("failure_count", std::size_t{0});
    m.summary = j.value("summary", json::object());
    return m;
}

void write_manifest(const RunManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write manifest " + path);
    out << to_json(m).dump(2) << '\n';
}

std::string canonical_hash(const json& doc) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(doc.dump())));
    return buf;
}

}  // namespace chaosbench
