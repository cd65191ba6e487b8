#pragma once

#include <stdexcept>
#include <string>

namespace polrouter {

// Invalid labels, ports, arguments supplied by the caller.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Mathematical precondition violated (non-PSD input, non-physical transfer...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Parameters that cannot describe a working device.
struct ConfigurationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Fits and extractions that could not produce a result.
struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace polrouter
