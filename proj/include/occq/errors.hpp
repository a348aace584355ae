#pragma once

#include <stdexcept>
#include <string>

namespace occq {

/// Base for every engine error. `hint` carries a remediation suggestion for CLI/API rendering.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, std::string hint = {})
        : std::runtime_error(what), hint_(std::move(hint)) {}
    const std::string& hint() const noexcept { return hint_; }

private:
    std::string hint_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
    using Error::Error;
};

/// Operation not defined for the given law (e.g. infinite mean).
class UnsupportedError : public Error {
    using Error::Error;
};

/// A conditioning event has probability zero.
class DegenerateError : public Error {
    using Error::Error;
};

/// No feasible solution for the requested problem.
class InfeasibleError : public Error {
    using Error::Error;
};

/// Numerical routine failed to meet its tolerance.
class NumericalError : public Error {
    using Error::Error;
};

/// MCMC diagnostics failed.
class ConvergenceError : public Error {
    using Error::Error;
};

/// Malformed input (files, JSON payloads).
class ParseError : public Error {
    using Error::Error;
};

/// Exception text without the library's "[json.exception.x.nnn] " tag.
inline std::string plain_message(const std::exception& e) {
    std::string m = e.what();
    if (!m.empty() && m.front() == '[') {
        const auto close = m.find("] ");
        if (close != std::string::npos) m.erase(0, close + 2);
    }
    return m;
}

}  // namespace occq
