#pragma once

#include <stdexcept>
#include <string>

namespace shear {

// Base class for every error the library raises.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File-level problems: missing files, bad magic, truncation, version skew.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Violated preconditions or invariants: shape mismatches, out-of-range ids,
// non-finite values escaping a kernel.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// A pruning budget that cannot be met by the available structures.
class InfeasiblePlanError : public Error {
public:
    explicit InfeasiblePlanError(const std::string& msg) : Error(msg) {}
};

} // namespace shear
