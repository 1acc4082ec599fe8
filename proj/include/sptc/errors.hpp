#pragma once

#include <stdexcept>
#include <string>

namespace sptc {

// Base for every library error. The CLI maps the concrete kinds onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid model or run parameters (negative widths, L < 3, bad step sizes).
class ParamError : public Error {
public:
    using Error::Error;
};

// Site index outside 1..L.
class IndexError : public Error {
public:
    using Error::Error;
};

// A precondition of an operation was violated (wrong boundary, bad subset, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

// A dense build was requested above the supported system size.
class CapacityError : public Error {
public:
    using Error::Error;
};

// An iterative method stopped before reaching the requested accuracy.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

} // namespace sptc
