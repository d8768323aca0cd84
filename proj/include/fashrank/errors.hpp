#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fashrank {

enum class ErrorCode {
    InvalidArgument,
    IndexOutOfRange,
    UnknownUser,
    UnknownItem,
    ShapeMismatch,
    Parse,
    Io,
    EmptyDataset,
    DegenerateDataset,
    DegenerateAffinity,
    NonFinite,
    TemporalRequired,
    NoEvaluableUsers,
};

// Stable snake_case name, used in service error payloads.
std::string_view error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace fashrank
