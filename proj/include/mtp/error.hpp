#pragma once

#include <stdexcept>
#include <string>

namespace mtp {

// Error with a stable machine-parsable code; the CLI prints these as
// "error: <code>: <message>" on a single line and exits nonzero.
class MtpError : public std::runtime_error {
public:
    MtpError(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

}  // namespace mtp
