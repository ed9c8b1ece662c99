#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quantclaw {

enum class ErrorKind {
    Validation,        // bad configuration or input data
    InsufficientData,  // not enough points/rows/samples to compute a result
    Domain,            // argument outside the mathematical domain
    Protocol,          // malformed wire payload
    DetectionBackend,  // classifier unreachable or timed out
    UpstreamTimeout,
    UpstreamDown,
    UpstreamStatus,    // upstream answered with a non-2xx status
    PoolExhausted,
    Authorization,
    Range,
    Telemetry,
    Runtime,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// CLI exit code for an error kind: 2 validation, 3 insufficient data, 4 runtime.
int exit_code_for(ErrorKind kind);

}  // namespace quantclaw
