#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace resure {

// Base class for all errors raised by this library. CLI maps subtypes to
// process exit codes (see tools/resure_main.cpp).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration: bad field values, unknown keys, malformed schema.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Dataset problems: missing files, malformed JSONL, inconsistent records.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// A numeric argument outside its domain (non-finite loss, negative loss).
class ValueError : public Error {
public:
    explicit ValueError(const std::string& msg) : Error(msg) {}
};

// Mismatched lengths between parallel inputs.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// An operation that requires at least one element got none.
class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& msg) : Error(msg) {}
};

// Turn-group index outside the registry's 1..N range.
class GroupIndexError : public Error {
public:
    explicit GroupIndexError(const std::string& msg) : Error(msg) {}
};

// raw_weight called with tau <= 0; callers must gate degenerate thresholds.
class ThresholdError : public Error {
public:
    explicit ThresholdError(const std::string& msg) : Error(msg) {}
};

// Step-log rows that cannot be joined against ground truth ids.
class JoinError : public Error {
public:
    explicit JoinError(const std::string& msg) : Error(msg) {}
};

// Non-finite model parameters after an optimizer step.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& msg, std::int64_t step)
        : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::int64_t step() const { return step_; }

private:
    std::int64_t step_;
};

}  // namespace resure
