#include "chaosbench/adapter.hpp"

#include <chrono>
#include <csignal>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace chaosbench {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kMaxLine = 64u << 20;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string describe_status(int status) {
    if (WIFEXITED(status)) return "exit status " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return "signal " + std::to_string(WTERMSIG(status));
    return "unknown status";
}

std::string clip(const std::string& s, std::size_t n = 512) {
    return s.size() <= n ? s : s.substr(0, n) + "...";
}

}  // namespace

AdapterClient::AdapterClient(AdapterOptions opts) : opts_(std::move(opts)) {
    if (opts_.command.empty()) throw InvalidArgument("adapter: empty command");
    if (!(opts_.request_timeout > 0.0)) throw InvalidArgument("adapter: request timeout must be positive");
    // A dead child must surface as a write error, not kill the harness.
    std::signal(SIGPIPE, SIG_IGN);
    spawn();
    try {
        handshake();
    } catch (...) {
        kill();
        throw;
    }
}

AdapterClient::~AdapterClient() {
    if (alive()) {
        try {
            shutdown(2.0);
        } catch (...) {
            kill();
        }
    }
}

void AdapterClient::spawn() {
    int in_pipe[2], out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0) throw AdapterError(std::string("adapter: pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw AdapterError(std::string("adapter: pipe: ") + std::strerror(errno));
    }
    const pid_t pid = fork();
    if (pid < 0) throw AdapterError(std::string("adapter: fork: ") + std::strerror(errno));
    if (pid == 0) {
        // Own process group, so killing the adapter also reaches whatever the shell started.
        setpgid(0, 0);
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execl("/bin/sh", "sh", "-c", opts_.command.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    setpgid(pid, pid);
    close(in_pipe[0]);
    close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
}

void AdapterClient::handshake() {
    const json reply = exchange({{"msg_type", "hello"}, {"id", next_id()}, {"payload", {{"protocol_version", kProtocolVersion}}}},
                                opts_.handshake_timeout);
    if (reply.value("msg_type", "") != "capabilities")
        throw ProtocolViolation("adapter: expected capabilities after hello", reply.dump());
    const json payload = reply.value("payload", json::object());
    caps_.raw = payload;
    caps_.name = payload.value("name", "");
    caps_.protocol_version = payload.value("protocol_version", 0);
    caps_.multivariate = payload.value("multivariate", false);
    caps_.quantiles = payload.value("quantiles", false);
    if (caps_.protocol_version != kProtocolVersion)
        throw ProtocolViolation("adapter: unsupported protocol version " + std::to_string(caps_.protocol_version),
                                reply.dump());
}

std::string AdapterClient::next_id() { return std::to_string(++counter_); }

void AdapterClient::send(const json& msg) {
    if (!alive()) throw AdapterExited("adapter: process is not running");
    const std::string line = msg.dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
        const ssize_t n = write(to_child_, line.data() + off, line.size() - off);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int status = reap(1.0);
            throw AdapterExited("adapter: write failed, process ended with " + describe_status(status));
        }
        off += static_cast<std::size_t>(n);
    }
}

std::string AdapterClient::read_line(double timeout) {
    const auto start = Clock::now();
    while (true) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (buffer_.size() > kMaxLine) {
            const std::string raw = buffer_;
            kill();
            throw ProtocolViolation("adapter: message exceeds size limit", clip(raw));
        }
        const double left = timeout - seconds_since(start);
        if (left <= 0.0) {
            kill();
            throw AdapterTimeout("adapter: no reply within " + std::to_string(timeout) + " s");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(std::ceil(left * 1000.0)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            throw AdapterError(std::string("adapter: poll: ") + std::strerror(errno));
        }
        if (ready == 0) continue;
        char chunk[65536];
        const ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw AdapterError(std::string("adapter: read: ") + std::strerror(errno));
        }
        if (n == 0) {
            const int status = reap(5.0);
            throw AdapterExited("adapter: process ended with " + describe_status(status));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

json AdapterClient::receive(double timeout) {
    const std::string line = read_line(timeout);
    json msg;
    try {
        msg = json::parse(line);
    } catch (const json::parse_error&) {
        kill();
        throw ProtocolViolation("adapter: reply is not valid JSON", clip(line));
    }
    if (!msg.is_object() || !msg.contains("msg_type") || !msg["msg_type"].is_string()) {
        kill();
        throw ProtocolViolation("adapter: reply lacks msg_type", clip(line));
    }
    return msg;
}

json AdapterClient::exchange(const json& msg, double timeout) {
    send(msg);
    json reply = receive(timeout);
    if (reply.value("id", json()) != msg.at("id")) {
        const std::string raw = reply.dump();
        kill();
        throw ProtocolViolation("adapter: reply id does not match request id " + msg.at("id").dump(), clip(raw));
    }
    return reply;
}

Forecast AdapterClient::forecast(const ForecastTask& task) {
    task.validate();
    const std::string id = next_id();
    json payload = {{"context", std::vector<double>(task.context.data(), task.context.data() + task.context.size())},
                    {"horizon", task.horizon},
                    {"channel_index", task.channel_index},
                    {"dt_lyap", task.dt_lyap}};
    const auto start = Clock::now();
    const json reply = exchange({{"msg_type", "forecast_request"}, {"id", id}, {"payload", payload}},
                                opts_.request_timeout);
    const double elapsed = seconds_since(start);
    const std::string type = reply.at("msg_type").get<std::string>();
    const json body = reply.value("payload", json::object());

    if (type == "error") {
        const std::string message = body.is_object() ? body.value("message", "unspecified error") : "unspecified error";
        throw AdapterError("adapter error: " + message);
    }
    if (type != "forecast_response") {
        kill();
        throw ProtocolViolation("adapter: unexpected msg_type '" + type + "'", clip(reply.dump()));
    }
    const json values = body.is_object() ? body.value("values", json()) : json();
    if (!values.is_array() || static_cast<Index>(values.size()) != task.horizon) {
        kill();
        throw ProtocolViolation("adapter: response must carry exactly " + std::to_string(task.horizon) + " values",
                                clip(reply.dump()));
    }
    Forecast f;
    f.model_id = caps_.name.empty() ? "extern" : caps_.name;
    f.values.resize(task.horizon);
    for (Index i = 0; i < task.horizon; ++i) {
        const json& v = values[static_cast<std::size_t>(i)];
        if (!v.is_number()) {
            kill();
            throw ProtocolViolation("adapter: non-numeric forecast value", clip(reply.dump()));
        }
        f.values(i) = v.get<double>();
    }
    f.inference_walltime = body.value("inference_walltime", elapsed);
    f.metadata = {{"adapter", caps_.name}, {"round_trip_walltime", elapsed}};
    if (body.contains("quantiles")) f.metadata["quantiles"] = body["quantiles"];
    return f;
}

int AdapterClient::reap(double grace) {
    if (pid_ <= 0) return -1;
    int status = 0;
    const auto start = Clock::now();
    while (true) {
        const pid_t r = waitpid(pid_, &status, WNOHANG);
        if (r == pid_) break;
        if (r < 0) {
            status = -1;
            break;
        }
        if (seconds_since(start) > grace) {
            ::kill(-pid_, SIGKILL);
            waitpid(pid_, &status, 0);
            status = -1;
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    close(to_child_);
    close(from_child_);
    to_child_ = from_child_ = -1;
    pid_ = -1;
    return status;
}

void AdapterClient::kill() {
    if (pid_ <= 0) return;
    ::kill(-pid_, SIGKILL);
    reap(5.0);
}

int AdapterClient::shutdown(double grace) {
    if (!alive()) return -1;
    try {
        send({{"msg_type", "shutdown"}, {"id", next_id()}});
    } catch (const AdapterError&) {
        return -1;
    }
    close(to_child_);
    to_child_ = -1;
    const int status = reap(grace);
    return status >= 0 && WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

ExternalForecaster::ExternalForecaster(AdapterOptions opts) : opts_(std::move(opts)) {}

ExternalForecaster::~ExternalForecaster() = default;

std::unique_ptr<AdapterClient> ExternalForecaster::acquire() const {
    {
        std::lock_guard lock(mutex_);
        if (!fatal_.empty()) throw AdapterExited(fatal_);
        while (!idle_.empty()) {
            auto c = std::move(idle_.back());
            idle_.pop_back();
            if (c->alive()) return c;
        }
    }
    return std::make_unique<AdapterClient>(opts_);
}

void ExternalForecaster::release(std::unique_ptr<AdapterClient> client) const {
    if (!client || !client->alive()) return;
    std::lock_guard lock(mutex_);
    idle_.push_back(std::move(client));
}

Forecast ExternalForecaster::forecast(const ForecastTask& task) const {
    std::unique_ptr<AdapterClient> client;
    try {
        client = acquire();
    } catch (const AdapterExited&) {
        throw;
    } catch (const AdapterError& e) {
        // Cannot even start the adapter: nothing later will succeed either.
        std::lock_guard lock(mutex_);
        fatal_ = std::string("adapter unavailable: ") + e.what();
        throw AdapterExited(fatal_);
    }
    try {
        Forecast f = client->forecast(task);
        f.model_id = id();
        release(std::move(client));
        return f;
    } catch (const AdapterExited& e) {
        std::lock_guard lock(mutex_);
        fatal_ = e.what();
        throw;
    } catch (const ProtocolViolation& e) {
        throw ProtocolViolation(std::string(e.what()) + " | raw: " + e.raw_payload(), e.raw_payload());
    } catch (const AdapterTimeout&) {
        throw;  // the client was killed; the next call spawns a fresh process
    } catch (const AdapterError&) {
        release(std::move(client));
        throw;
    }
}

// ---------------------------------------------------------------------------

std::vector<ConformanceCheck> run_conformance(const AdapterOptions& opts) {
    std::vector<ConformanceCheck> checks;
    auto record = [&](std::string name, bool ok, std::string detail = {}) {
        checks.push_back({std::move(name), ok, std::move(detail)});
        return ok;
    };

    std::unique_ptr<AdapterClient> client;
    const auto start = Clock::now();
    try {
        AdapterOptions o = opts;
        o.handshake_timeout = std::min(o.handshake_timeout, 5.0);
        client = std::make_unique<AdapterClient>(o);
    } catch (const std::exception& e) {
        record("handshake", false, e.what());
        return checks;
    }
    const double handshake_time = seconds_since(start);
    record("handshake", handshake_time < 5.0, "hello -> capabilities in " + std::to_string(handshake_time) + " s");
    record("capabilities", !client->capabilities().name.empty() &&
                               client->capabilities().protocol_version == kProtocolVersion,
           "name='" + client->capabilities().name + "'");

    // Context with values that stress round-trip float formatting.
    ForecastTask task;
    task.context.resize(64);
    for (Index i = 0; i < task.context.size(); ++i)
        task.context(i) = std::sin(0.37 * static_cast<double>(i)) * 1e3 / 3.0 + 1e-17 * static_cast<double>(i);
    task.horizon = 300;

    auto try_forecast = [&](const std::string& name, const ForecastTask& t) -> std::optional<Forecast> {
        try {
            if (!client->alive()) client = std::make_unique<AdapterClient>(opts);
            Forecast f = client->forecast(t);
            const bool ok = f.values.size() == t.horizon && f.values.allFinite();
            record(name, ok, "received " + std::to_string(f.values.size()) + " values");
            return f;
        } catch (const std::exception& e) {
            record(name, false, e.what());
            return std::nullopt;
        }
    };

    const auto f300 = try_forecast("forecast horizon 300", task);
    ForecastTask short_task = task;
    short_task.horizon = 1;
    try_forecast("forecast horizon 1", short_task);

    if (f300 && client->capabilities().name == "naive") {
        const Forecast ref = naive_forecast(task);
        record("naive matches in-core naive", f300->values == ref.values,
               "bit-exact comparison of " + std::to_string(ref.values.size()) + " values");
    }

    // Distinct ids, each answered exactly once and in order.
    try {
        if (!client->alive()) client = std::make_unique<AdapterClient>(opts);
        bool ok = true;
        std::string detail;
        for (int i = 0; i < 3 && ok; ++i) {
            const std::string id = "conf-" + std::to_string(i);
            const json reply = client->exchange(
                {{"msg_type", "forecast_request"},
                 {"id", id},
                 {"payload", {{"context", {1.0, 2.0, 3.0}}, {"horizon", 2}, {"channel_index", 0}, {"dt_lyap", 1.0 / 30}}}},
                opts.request_timeout);
            ok = reply.value("msg_type", "") == "forecast_response";
            if (!ok) detail = "reply to " + id + ": " + clip(reply.dump());
        }
        record("request ids echoed", ok, detail);
    } catch (const std::exception& e) {
        record("request ids echoed", false, e.what());
    }

    // Invalid request: an error message with the same id, process stays alive.
    try {
        if (!client->alive()) client = std::make_unique<AdapterClient>(opts);
        const json reply = client->exchange(
            {{"msg_type", "forecast_request"}, {"id", "conf-bad"}, {"payload", {{"context", json::array()}, {"horizon", 0}}}},
            opts.request_timeout);
        const bool ok = reply.value("msg_type", "") == "error";
        record("invalid request reported as error", ok, clip(reply.dump()));
    } catch (const std::exception& e) {
        record("invalid request reported as error", false, e.what());
    }
    try_forecast("alive after error", short_task);

    try {
        if (!client->alive()) client = std::make_unique<AdapterClient>(opts);
        const int code = client->shutdown(5.0);
        record("clean shutdown", code == 0, "exit code " + std::to_string(code));
    } catch (const std::exception& e) {
        record("clean shutdown", false, e.what());
    }
    return checks;
}

}  // namespace chaosbench
