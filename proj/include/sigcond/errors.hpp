#pragma once

#include <stdexcept>
#include <string>

namespace sigcond {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class ShapeMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Some plate cannot carry its prescribed g-mass under its constraint.
class InfeasibleProblem : public Error {
public:
    using Error::Error;
};

/// Kernel matrix failed the positive (semi)definiteness gate.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class EigenSolverFailure : public Error {
public:
    using Error::Error;
};

} // namespace sigcond
