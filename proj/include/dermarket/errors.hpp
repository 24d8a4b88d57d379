#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dermarket {

// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class UnknownHousehold : public Error {
public:
    explicit UnknownHousehold(std::string id)
        : Error("household '" + id + "' is not mapped to any bus"), id_(std::move(id)) {}
    const std::string& id() const noexcept { return id_; }

private:
    std::string id_;
};

class InsufficientHistory : public Error {
public:
    using Error::Error;
};

class BoundsError : public Error {
public:
    using Error::Error;
};

class MissingPrice : public Error {
public:
    using Error::Error;
};

class NegativeGap : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised by the optimization layer. `tag()` names the constraint judged most
/// responsible (largest certificate multiplier or largest residual).
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::string tag)
        : Error(tag.empty() ? what : what + " [" + tag + "]"), tag_(std::move(tag)) {}
    const std::string& tag() const noexcept { return tag_; }

private:
    std::string tag_;
};

class Infeasible : public SolverError {
public:
    using SolverError::SolverError;
};

class NumericalFailure : public SolverError {
public:
    using SolverError::SolverError;
};

class BranchLimit : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace dermarket
