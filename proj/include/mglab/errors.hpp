#pragma once

#include <stdexcept>
#include <string>

namespace mglab {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Argument violates an operation's contract (bad index, bad range, ...).
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& what) : Error(what) {}
};

// A statistical estimate cannot be formed from the data given.
class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& what) : Error(what) {}
};

// Experiment configuration is malformed or violates a module precondition.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// Root bracketing failed; the supplied density is pathological.
class NoFixedPointError : public Error {
public:
    explicit NoFixedPointError(const std::string& what) : Error(what) {}
};

// Failure inside a simulation loop, annotated with the step it happened at.
class RunError : public Error {
public:
    explicit RunError(const std::string& what) : Error(what) {}
};

}  // namespace mglab
