#pragma once

#include <stdexcept>
#include <string>

namespace debias {

// Input or invariant violations; the CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Editor-backend failures (spawn, protocol, timeout); CLI exit code 3.
class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace debias
