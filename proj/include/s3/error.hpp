#pragma once

#include <stdexcept>
#include <string>

namespace s3 {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data that cannot be scored: zero variance, singular covariance, too few rows.
class DegenerateData : public Error {
public:
    using Error::Error;
};

/// A graph contains an arc that its constraint mask forbids.
class ConstraintViolation : public Error {
public:
    using Error::Error;
};

class ExtensionCapExceeded : public Error {
public:
    using Error::Error;
};

class NoExtension : public Error {
public:
    using Error::Error;
};

/// Matrix or layout dimensions that do not agree.
class ShapeMismatch : public Error {
public:
    using Error::Error;
};

/// Prior knowledge that references nodes it is not allowed to constrain.
class InvalidPrior : public Error {
public:
    using Error::Error;
};

class EmptyMultiset : public Error {
public:
    using Error::Error;
};

/// Too many subset searches failed for the run to be meaningful.
class SearchFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace s3
