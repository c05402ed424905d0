#pragma once

#include <stdexcept>
#include <string>

namespace idcanvas {

// Broken precondition on shapes, indices or argument ranges.
class ContractViolation : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

// Bad user-supplied configuration (config file, CLI flag, degradation spec).
class ConfigError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Landmark sets that do not determine a similarity transform.
class DegenerateGeometry : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// A NaN or Inf showed up where finite values are required.
class NonFiniteError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) {
        throw ContractViolation(what);
    }
}

}  // namespace idcanvas
