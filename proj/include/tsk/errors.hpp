#pragma once

#include <stdexcept>
#include <string>

namespace tsk {

// Base for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input data: parse failures, shape mismatches, violated series
// invariants in files. CLI exit code 4.
class FormatError : public Error {
public:
    using Error::Error;
};

// Invalid configuration or violated call preconditions. CLI exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Channel/shape mismatch between otherwise valid objects.
class DimensionError : public Error {
public:
    using Error::Error;
};

// A problem instance that cannot be solved as posed (e.g. single-class SVM).
class DegenerateProblemError : public Error {
public:
    using Error::Error;
};

// Too few observations for the requested statistic.
class InsufficientSampleError : public Error {
public:
    using Error::Error;
};

// Numerical failures. CLI exit code 3.
class NumericError : public Error {
public:
    using Error::Error;
};

class SingularKernelError : public NumericError {
public:
    using NumericError::NumericError;
};

class SingularShiftError : public NumericError {
public:
    using NumericError::NumericError;
};

class RankError : public NumericError {
public:
    using NumericError::NumericError;
};

class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace tsk
