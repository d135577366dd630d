#pragma once

#include "chaosbench/errors.hpp"
#include "chaosbench/forecasters.hpp"

#include <json.hpp>

#include <sys/types.h>

#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace chaosbench {

// Wire protocol: one JSON object per line over the child's stdin/stdout.
// Every message has "msg_type", "id" and (optionally) "payload". See
// docs/protocol.md.
inline constexpr int kProtocolVersion = 1;

struct AdapterOptions {
    std::string command;             // run through /bin/sh -c
    double request_timeout = 300.0;  // seconds per forecast request
    double handshake_timeout = 30.0;
};

struct Capabilities {
    std::string name;
    int protocol_version = 0;
    bool multivariate = false;
    bool quantiles = false;
    nlohmann::json raw;
};

/// One adapter process. Not thread-safe; use one client per worker.
class AdapterClient {
public:
    // Spawns the process and performs the hello/capabilities handshake.
    explicit AdapterClient(AdapterOptions opts);
    ~AdapterClient();
    AdapterClient(const AdapterClient&) = delete;
    AdapterClient& operator=(const AdapterClient&) = delete;

    const Capabilities& capabilities() const noexcept { return caps_; }
    bool alive() const noexcept { return pid_ > 0; }
    pid_t pid() const noexcept { return pid_; }

    /// Sends a forecast_request and waits for the matching response.
    /// Throws AdapterTimeout (process killed), ProtocolViolation (malformed
    /// reply, process killed), AdapterExited, or AdapterError for an error
    /// message from the adapter (process stays usable).
    Forecast forecast(const ForecastTask& task);

    // Low-level: send one message, return the next line parsed as JSON.
    nlohmann::json exchange(const nlohmann::json& msg, double timeout);
    void send(const nlohmann::json& msg);
    nlohmann::json receive(double timeout);

    // Polite shutdown; kills the process if it does not exit within `grace` seconds.
    // Returns the exit status (−1 if it had to be killed).
    int shutdown(double grace = 5.0);
    void kill();
    std::string next_id();

private:
    void spawn();
    void handshake();
    std::string read_line(double timeout);
    int reap(double grace);

    AdapterOptions opts_;
    Capabilities caps_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::uint64_t counter_ = 0;
};

/// Forecaster backed by a pool of adapter processes (one per concurrent caller).
/// A process that times out or violates the protocol is discarded and a fresh
/// one is spawned on the next call. A nonzero exit makes every later call fail
/// fast with the same reason.
class ExternalForecaster final : public Forecaster {
public:
    explicit ExternalForecaster(AdapterOptions opts);
    ~ExternalForecaster() override;

    std::string id() const override { return "extern:" + opts_.command; }
    Forecast forecast(const ForecastTask& task) const override;

private:
    std::unique_ptr<AdapterClient> acquire() const;
    void release(std::unique_ptr<AdapterClient> client) const;

    AdapterOptions opts_;
    mutable std::mutex mutex_;
    mutable std::vector<std::unique_ptr<AdapterClient>> idle_;
    mutable std::string fatal_;
};

struct ConformanceCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Protocol conformance suite run by `serve-check`.
std::vector<ConformanceCheck> run_conformance(const AdapterOptions& opts);

}  // namespace chaosbench
