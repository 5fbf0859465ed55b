// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace lti {

// Numeric values are part of the C API (see include/lti/lti.h); keep in sync.
enum class ErrorCode : int {
    InvalidArgument = 1,
    InvalidWeight = 2,
    EvaluationFailure = 3,
    UnsupportedDimension = 4,
    InversionFailure = 5,
    NumericalOverflow = 6,
    IntegrationFailure = 7,
    DomainError = 8,
    TrainingFailure = 9,
    ConfigurationError = 10,
    IoError = 11,
    Internal = 12,
};

[[nodiscard]] const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
    throw Error(code, what);
}

inline void require(bool condition, const std::string& what) {
    if (!condition) fail(ErrorCode::InvalidArgument, what);
}

} // namespace lti
