#pragma once

#include <stdexcept>

namespace mixaug {

// Shared error taxonomy. Everything derives from std::runtime_error so the
// CLI can catch coarsely; ArgumentError and DomainError signal bad caller
// input and map to usage failures there.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArgumentError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mixaug
