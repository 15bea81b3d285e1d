#pragma once

#include <stdexcept>
#include <string>

namespace minsg {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: malformed config, violated model assumption, bad argument.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its contract (non-convergence,
/// breakdown, ambiguity). `diagnostics()` carries a trace worth persisting.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::string diagnostics = {})
        : Error(what), diagnostics_(std::move(diagnostics)) {}

    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

/// Independent checks that must agree did not agree.
class ConsistencyError : public Error {
public:
    ConsistencyError(const std::string& what, std::string dump = {})
        : Error(what), dump_(std::move(dump)) {}

    const std::string& dump() const noexcept { return dump_; }

private:
    std::string dump_;
};

}  // namespace minsg
