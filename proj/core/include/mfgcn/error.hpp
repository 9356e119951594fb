#pragma once

#include <stdexcept>
#include <string>

namespace mfgcn {

/// Raised when a numerical stage cannot produce a trustworthy result
/// (non-finite coefficients, exploding regressions, failed drift inversion).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by configuration parsing; the message carries the line number.
class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& what)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace mfgcn
