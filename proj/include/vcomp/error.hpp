#pragma once

#include <stdexcept>
#include <string>

namespace vcomp {

// Error kinds surfaced by the library. The numeric values are mirrored by the
// C API status codes in vcomp.h.
enum class ErrorCode : int {
    kOk = 0,
    kParse = 1,
    kValidation = 2,
    kNotFound = 3,
    kDuplicate = 4,
    kOutOfRange = 5,
    kTooLong = 6,
    kSchema = 7,
    kIo = 8,
    kInvalidArgument = 9,
    kNumerical = 10,
    kInternal = 11,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace vcomp
