#pragma once

#include <stdexcept>
#include <string>

namespace shield {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct ConstructionError : Error { using Error::Error; };
struct DegeneracyError : Error { using Error::Error; };
struct SamplingError : Error { using Error::Error; };

// trajectory left the half-space z > 0 (or z < z_upper)
struct BarrierDomainError : Error {
    double time;
    BarrierDomainError(const std::string& msg, double t) : Error(msg), time(t) {}
};

struct DivergenceError : Error {
    double time;
    DivergenceError(const std::string& msg, double t) : Error(msg), time(t) {}
};

}  // namespace shield
