#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tfc {

/// Input violates a model invariant (network, profile, scenario).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed case or scenario text. `line()` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Integration produced a non-finite state.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::size_t step)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

} // namespace tfc
