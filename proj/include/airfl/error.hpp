#pragma once

#include <stdexcept>
#include <string>

namespace airfl {

// Failure categories; the C API maps each onto an airfl_status code.
enum class ErrorKind {
    invalid_argument,
    domain,
    infeasible,
    io,
    internal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const char* what)
{
    if (!cond) fail(kind, what);
}

} // namespace airfl
