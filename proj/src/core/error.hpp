#pragma once

#include <stdexcept>
#include <string>

namespace navbench {

/// Error categories. The C API maps each onto a status code and the CLI
/// maps status codes onto process exit codes.
enum class ErrorKind {
    InvalidArgument, // rejected input or configuration
    Parse,           // malformed text/binary input
    Mismatch,        // checkpoint/config incompatibility
    Io,              // file system failure
    Contract,        // API misuse, e.g. stepping a finished episode
    Numeric,         // non-finite values
    Runtime,         // anything else
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

} // namespace navbench
