#pragma once

#include <stdexcept>
#include <string>

namespace orb {

/// Bad user input: malformed files, invalid counts, inadmissible parameters.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numerical procedure could not produce an answer (bracketing, retries exhausted).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace orb
