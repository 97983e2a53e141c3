#pragma once

#include <stdexcept>
#include <string>

namespace planoforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes incompatible with the requested operation.
struct ShapeError : Error {
    using Error::Error;
};

// A numeric argument outside its documented range, or a non-finite value.
struct ValueError : Error {
    using Error::Error;
};

// File parsing / serialization failures; message carries line or field context.
struct IoError : Error {
    using Error::Error;
};

// A domain-type invariant does not hold (duplicate sku, overlap, ...).
struct InvariantError : Error {
    using Error::Error;
};

}  // namespace planoforge
