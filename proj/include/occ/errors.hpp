#pragma once

#include <stdexcept>
#include <string>

namespace occ {

// Caller handed us something that violates an operation's precondition
// (shape mismatch, unknown id, asymmetric query matrix, ...).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Configuration values outside their admissible range.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Mathematically undefined input: zero vectors for cosine similarity,
// all-zero loss vectors, zero sampling probability on a positive loss.
class DegenerateInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Non-finite values appeared in parameters, gradients or losses.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace occ
