#pragma once

#include <stdexcept>
#include <string>

namespace warpcone {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: config files, CSV tables, expressions, parameter maps.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical routine failed (non-positive warping, quadrature or solver
/// non-convergence, evaluation outside a domain).
class EvaluationError : public Error {
public:
    using Error::Error;
};

/// The solvability hypotheses are not met (divergent Milnor integral,
/// non-normalizable mode, missing monotone threshold).
class HypothesisError : public Error {
public:
    using Error::Error;
};

}  // namespace warpcone
