#pragma once

#include "chaosbench/errors.hpp"
#include "chaosbench/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

namespace chaosbench {

inline constexpr int kRecordSchemaVersion = 1;

std::string harness_version();
// Current UTC time, ISO-8601 with seconds.
std::string utc_timestamp();

struct Walltimes {
    double tune = 0.0;
    double fit = 0.0;
    double inference = 0.0;
};

/// One benchmark row: system × initial condition × channel × model × knobs.
struct ResultRecord {
    std::string system;
    int ic_index = 0;
    int channel = 0;
    std::string model_id;
    std::string experiment_kind = "baseline";
    nlohmann::json kind_params = nlohmann::json::object();
    std::string mode = "channel_independent";
    MetricReport metrics;
    Walltimes walltimes;
    Seed seed = 0;
    std::string status = "ok";  // "ok" or "failed"
    std::string failure_reason;
    nlohmann::json forecast_meta = nlohmann::json::object();
    nlohmann::json analysis = nlohmann::json::object();  // kind-specific extras, e.g. IC density
    std::string timestamp;
    std::string harness_version;
    // Fields this version does not know about, carried through unchanged.
    nlohmann::json unknown = nlohmann::json::object();

    bool ok() const noexcept { return status == "ok"; }
};

nlohmann::json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

// Serialized record minus timestamp and walltimes; equal payloads mean equal science.
std::string record_payload(const ResultRecord& r);

struct LoadResult {
    std::vector<ResultRecord> records;
    std::size_t corrupt_lines = 0;
};

/// Reads a newline-delimited record stream. Lines that fail to parse (e.g. a
/// truncated tail after a crash) are skipped and counted; a schema version
/// other than kRecordSchemaVersion raises SchemaMismatch.
LoadResult load_records(const std::string& path);
LoadResult parse_records(std::istream& in);

/// Append-only writer; one JSON object per line, flushed per record. Safe to
/// call from several threads.
class RecordAppender {
public:
    explicit RecordAppender(const std::string& path);
    void append(const ResultRecord& r);
    std::size_t written() const;

private:
    mutable std::mutex mutex_;
    std::ofstream out_;
    std::size_t written_ = 0;
};

/// Provenance written next to every run's record stream.
struct RunManifest {
    std::string config_hash;
    std::string harness_version;
    std::string registry_checksum;
    Seed master_seed = 0;
    std::string start_time;
    std::string end_time;
    std::size_t record_count = 0;
    std::size_t success_count = 0;
    std::size_t failure_count = 0;
    nlohmann::json summary = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);
void write_manifest(const RunManifest& m, const std::string& path);

// Canonical hash of a JSON document: object keys sorted, no whitespace.
std::string canonical_hash(const nlohmann::json& doc);

}  // namespace chaosbench
