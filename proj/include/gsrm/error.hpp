#pragma once

#include <stdexcept>
#include <string>

namespace gsrm {

// All recoverable failures in the library throw Error. The message is expected
// to carry enough coordinates (file, utterance index, phone index, field name)
// to locate the offending input without a debugger.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

} // namespace gsrm
