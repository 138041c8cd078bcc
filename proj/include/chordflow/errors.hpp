#pragma once

#include <stdexcept>
#include <string>

namespace chordflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Integrator gave up; `time_reached` is the last accepted time.
struct IntegrationError : Error {
    double time_reached;
    IntegrationError(const std::string& what, double t)
        : Error(what + " (time reached " + std::to_string(t) + ")"), time_reached(t) {}
};

struct RootFindError : Error { using Error::Error; };
struct CausticError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct DegenerateCenterError : Error { using Error::Error; };
struct TruncationError : Error { using Error::Error; };
struct FitError : Error { using Error::Error; };
struct CostGuardError : Error { using Error::Error; };

struct PreconditionError : Error {
    double residual;
    PreconditionError(const std::string& what, double r)
        : Error(what + " (residual " + std::to_string(r) + ")"), residual(r) {}
};

}  // namespace chordflow
