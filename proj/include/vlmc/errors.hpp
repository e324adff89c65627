#pragma once

#include <stdexcept>
#include <string>

namespace vlmc {

/// Bad or missing configuration (format descriptors, flags, config files).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (empty reference list, m = 0, ...).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition that well-formed pipelines never break.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace vlmc
