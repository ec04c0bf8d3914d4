#pragma once

#include <stdexcept>
#include <string>

namespace softfail {

enum class ErrorKind {
    InvalidArgument,
    InvalidGeometry,
    NumericDomain,
    Calibration,
    Divergence,
    Config,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code used by the CLI for each error kind.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace softfail
