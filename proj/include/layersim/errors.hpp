#pragma once

#include <stdexcept>
#include <string>

namespace layersim {

// Bad scenario material: unknown VMs, malformed values, broken references.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// API misuse: advancing a terminal session, routing from a terminal layer.
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& what) : std::runtime_error(what) {}
};

// Missing record where one was required (e.g. challenge generation for an
// unknown tenant).
class LookupError : public std::runtime_error {
public:
    explicit LookupError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace layersim
