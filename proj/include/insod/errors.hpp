#pragma once

#include <stdexcept>
#include <string>

namespace insod {

// Filtering and geodesy errors are thrown as distinct types so callers can
// map them to exit codes (validation vs. numerical divergence).

struct PolarSingularity : std::domain_error {
    explicit PolarSingularity(const std::string& what) : std::domain_error(what) {}
};

struct InvalidSegment : std::invalid_argument {
    explicit InvalidSegment(const std::string& what) : std::invalid_argument(what) {}
};

struct InsufficientSamples : std::invalid_argument {
    explicit InsufficientSamples(const std::string& what) : std::invalid_argument(what) {}
};

struct InsufficientDistance : std::invalid_argument {
    explicit InsufficientDistance(const std::string& what) : std::invalid_argument(what) {}
};

struct WindowUnderflow : std::invalid_argument {
    explicit WindowUnderflow(const std::string& what) : std::invalid_argument(what) {}
};

struct KindMismatch : std::invalid_argument {
    explicit KindMismatch(const std::string& what) : std::invalid_argument(what) {}
};

struct CovarianceNotPD : std::runtime_error {
    explicit CovarianceNotPD(const std::string& what) : std::runtime_error(what) {}
};

struct SingularInnovationCovariance : std::runtime_error {
    explicit SingularInnovationCovariance(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateLikelihoods : std::runtime_error {
    explicit DegenerateLikelihoods(const std::string& what) : std::runtime_error(what) {}
};

struct StreamGap : std::runtime_error {
    explicit StreamGap(const std::string& what) : std::runtime_error(what) {}
};

struct SchemaError : std::runtime_error {
    SchemaError(const std::string& what, long line) : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line(line) {}
    long line;
};

struct InvalidConfig : std::invalid_argument {
    explicit InvalidConfig(const std::string& what) : std::invalid_argument(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace insod
