#pragma once

#include <stdexcept>
#include <string>

namespace pleio {

// Bad user-facing configuration: missing columns, malformed scenario files,
// out-of-range parameters. Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Input data violates a validated invariant (duplicate ids, empty
// intersection after harmonization, ...). Also CLI exit code 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Statistical degeneracies. CLI exit code 3.
struct StatError : std::runtime_error {
    explicit StatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct InsufficientInstruments : StatError {
    explicit InsufficientInstruments(const std::string& msg) : StatError(msg) {}
};

struct DegenerateDenominator : StatError {
    explicit DegenerateDenominator(const std::string& msg) : StatError(msg) {}
};

struct DegenerateVariance : StatError {
    explicit DegenerateVariance(const std::string& msg) : StatError(msg) {}
};

struct SingularDesign : StatError {
    explicit SingularDesign(const std::string& msg) : StatError(msg) {}
};

struct AlignmentError : StatError {
    explicit AlignmentError(const std::string& msg) : StatError(msg) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pleio
