#ifndef SCOREMIX_ERRORS_HPP
#define SCOREMIX_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scoremix {

/// Base class of every error raised by the library.
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
    DimensionMismatch(std::size_t expected, std::size_t got)
        : InvalidArgument("dimension mismatch: expected " + std::to_string(expected) + ", got " +
                          std::to_string(got)) {}
};

class LoadError : public Error {
public:
    using Error::Error;
};

/// Raised when a smooth-only quantity is requested on ND(A1, A2).
class NonsmoothPoint : public Error {
public:
    using Error::Error;
};

/// Clarke hull requested on the simultaneous interface with lambda > 1.
class OuterHullOnly : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public Error {
public:
    using Error::Error;
};

class IntegrationFailure : public Error {
public:
    IntegrationFailure(const std::string& what, std::size_t step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DegenerateFit : public Error {
public:
    using Error::Error;
};

}  // namespace scoremix

#endif  // SCOREMIX_ERRORS_HPP
