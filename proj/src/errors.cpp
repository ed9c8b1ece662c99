#include "quantclaw/errors.hpp"

namespace quantclaw {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Protocol: return "protocol";
        case ErrorKind::DetectionBackend: return "detection_backend";
        case ErrorKind::UpstreamTimeout: return "upstream_timeout";
        case ErrorKind::UpstreamDown: return "upstream_down";
        case ErrorKind::UpstreamStatus: return "upstream_status";
        case ErrorKind::PoolExhausted: return "pool_exhausted";
        case ErrorKind::Authorization: return "authorization";
        case ErrorKind::Range: return "range";
        case ErrorKind::Telemetry: return "telemetry";
        case ErrorKind::Runtime: return "runtime";
    }
    return "unknown";
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation:
        case ErrorKind::Domain:
        case ErrorKind::Protocol:
        case ErrorKind::Range:
            return 2;
        case ErrorKind::InsufficientData:
            return 3;
        default:
            return 4;
    }
}

}  // namespace quantclaw
