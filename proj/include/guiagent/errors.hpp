#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace guiagent {

// Exception carrying a module-specific error code alongside the message.
template <typename Code>
class CodedError : public std::runtime_error {
public:
    CodedError(Code code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

} // namespace guiagent
