#ifndef XFLOW_ERRORS_HPP
#define XFLOW_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace xflow {

// Invalid user input: configuration, energy parameters, shapes.
// Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// The time stepper or a study hit a state it cannot continue from
// (NaN, density at the energy's domain bound, CFL violation).
// Maps to CLI exit code 3.
class NumericalAbort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File-level failures: unreadable, truncated, wrong magic/version.
// Maps to CLI exit code 4.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Query of e' where the subdifferential is not a singleton.
class MultivaluedError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Sampled input that fails the convexity check; carries the offending
// sample index.
class NonConvexError : public std::invalid_argument {
public:
    NonConvexError(const std::string& what, std::size_t index)
        : std::invalid_argument(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

} // namespace xflow

#endif
