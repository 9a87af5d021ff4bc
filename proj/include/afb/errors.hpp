#pragma once

#include <stdexcept>
#include <string>

namespace afb {

/// Malformed or inconsistent input data (files, datasets, snapshots).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user configuration (unknown config keys, out-of-range settings).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An internal invariant was found violated at runtime.
class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace afb
