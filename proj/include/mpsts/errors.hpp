#pragma once

#include <stdexcept>
#include <string>

namespace mpsts {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// M - m falls inside the band where the closed-form pmf is numerically unsafe.
class PoleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Caller violated a structural precondition (e.g. m != 1 for quadratures).
class PreconditionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the offending line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace mpsts
