#pragma once

#include <stdexcept>

namespace avgdqn {

// Raised when an object is asked to do something its current mode forbids
// (pushing into a full-coverage buffer, sampling from an empty one, ...).
class InvalidOperation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Raised for inputs that are well-formed but outside what an operation supports.
class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace avgdqn
