#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deint {

/// Base of all library errors.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
   public:
    using Error::Error;
};

/// A root-finder could not bracket the requested summary value.
class TargetUnreachable : public Error {
   public:
    using Error::Error;
};

/// Bootstrap on a sample that carries no events.
class DegenerateSample : public Error {
   public:
    using Error::Error;
};

/// Rejection sampling ran out of proposals before collecting enough draws.
class AcceptanceRateTooLow : public Error {
   public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when unknown.
class ParseError : public Error {
   public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const { return line_; }

   private:
    std::size_t line_;
};

}  // namespace deint
