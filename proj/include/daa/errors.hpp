#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace daa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (bad k, non-positive beta, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A token id outside [0, V).
class RangeError : public Error {
public:
    using Error::Error;
};

/// Malformed input file; `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Statistics on inputs that carry no information (constant series, rank-deficient design).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Metric records fed to the detector out of step order.
class SequencingError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or gradient during training.
class TrainingError : public Error {
public:
    TrainingError(const std::string& what, std::size_t pair_index)
        : Error(what), pair_index_(pair_index) {}
    std::size_t pair_index() const noexcept { return pair_index_; }

private:
    std::size_t pair_index_;
};

/// Reward oracle failure during evaluation.
class HarnessError : public Error {
public:
    HarnessError(const std::string& what, std::size_t prompt_index)
        : Error(what), prompt_index_(prompt_index) {}
    std::size_t prompt_index() const noexcept { return prompt_index_; }

private:
    std::size_t prompt_index_;
};

}  // namespace daa
