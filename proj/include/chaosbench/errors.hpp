#pragma once

#include <stdexcept>
#include <string>

namespace chaosbench {

// Root of every failure raised by the harness.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IntegrationBlowup : public Error {
public:
    IntegrationBlowup(const std::string& what, double last_valid_time)
        : Error(what), last_valid_time_(last_valid_time) {}
    double last_valid_time() const noexcept { return last_valid_time_; }

private:
    double last_valid_time_;
};

class EstimationFailure : public Error {
public:
    using Error::Error;
};

class UpsamplingRefused : public Error {
public:
    using Error::Error;
};

class FitFailure : public Error {
public:
    using Error::Error;
};

class UnsupportedMode : public Error {
public:
    using Error::Error;
};

class DegenerateGeometry : public Error {
public:
    using Error::Error;
};

class UndefinedSimilarity : public Error {
public:
    using Error::Error;
};

class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

class NumericFailure : public Error {
public:
    using Error::Error;
};

class ShuffleImpossible : public Error {
public:
    using Error::Error;
};

class DegenerateFrame : public Error {
public:
    DegenerateFrame(const std::string& what, std::size_t frame)
        : Error(what), frame_(frame) {}
    std::size_t frame() const noexcept { return frame_; }

private:
    std::size_t frame_;
};

class SchemaMismatch : public Error {
public:
    using Error::Error;
};

// Config document problems; `location` is "line N" or a field path.
class ConfigError : public Error {
public:
    ConfigError(const std::string& location, const std::string& what)
        : Error(location + ": " + what), location_(location) {}
    const std::string& location() const noexcept { return location_; }

private:
    std::string location_;
};

class AdapterError : public Error {
public:
    using Error::Error;
};

class ProtocolViolation : public AdapterError {
public:
    ProtocolViolation(const std::string& what, std::string raw)
        : AdapterError(what), raw_(std::move(raw)) {}
    const std::string& raw_payload() const noexcept { return raw_; }

private:
    std::string raw_;
};

class AdapterTimeout : public AdapterError {
public:
    using AdapterError::AdapterError;
};

class AdapterExited : public AdapterError {
public:
    using AdapterError::AdapterError;
};

}  // namespace chaosbench
