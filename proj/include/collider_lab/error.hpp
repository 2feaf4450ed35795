#pragma once

#include <stdexcept>
#include <string>

namespace collider_lab {

/// Bad input: out-of-range parameters, malformed configs, wrong response domain.
/// The CLI maps this to exit status 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation that could not be completed (singular information, rate
/// overflow, quadrature failure). The CLI maps this to exit status 2.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& message) {
    if (!ok) throw ValidationError(message);
}

}  // namespace collider_lab
