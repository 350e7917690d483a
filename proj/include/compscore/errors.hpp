#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace compscore {

enum class ErrorCode {
    invalid_dimension,
    invalid_data,
    invalid_total,
    invalid_family,
    not_applicable,
    configuration,
    insufficient_totals,
    singular_system,
    unidentifiable,
    study_failed,
    infeasible_truncation,
    envelope_failure,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_dimension: return "invalid_dimension";
    case ErrorCode::invalid_data: return "invalid_data";
    case ErrorCode::invalid_total: return "invalid_total";
    case ErrorCode::invalid_family: return "invalid_family";
    case ErrorCode::not_applicable: return "not_applicable";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::insufficient_totals: return "insufficient_totals";
    case ErrorCode::singular_system: return "singular_system";
    case ErrorCode::unidentifiable: return "unidentifiable";
    case ErrorCode::study_failed: return "study_failed";
    case ErrorCode::infeasible_truncation: return "infeasible_truncation";
    case ErrorCode::envelope_failure: return "envelope_failure";
    }
    return "unknown";
}

// Process exit status used by the command line tool: 2 input, 3 numeric, 4 sampler.
inline int exit_status(ErrorCode code) {
    switch (code) {
    case ErrorCode::singular_system:
    case ErrorCode::unidentifiable:
    case ErrorCode::study_failed:
        return 3;
    case ErrorCode::infeasible_truncation:
    case ErrorCode::envelope_failure:
        return 4;
    default:
        return 2;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

} // namespace compscore
