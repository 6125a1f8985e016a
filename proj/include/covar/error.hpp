#pragma once

#include <stdexcept>
#include <string>

namespace covar {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses let the CLI map failures to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

// gamma_{1d} <= 0: the conditional quadratic has no minimum to cross.
class CurvatureError : public Error {
public:
    using Error::Error;
};

// Stage-2 importance weights all vanished (no scenario crossed g*).
class DegenerateIsError : public Error {
public:
    using Error::Error;
};

// The requested weighted quantile lies in the +infinity mass.
class InfiniteQuantileError : public Error {
public:
    using Error::Error;
};

class InfeasibleCiError : public Error {
public:
    using Error::Error;
};

class EmptyBandError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace covar
