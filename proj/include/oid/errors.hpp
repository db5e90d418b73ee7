#pragma once

#include <stdexcept>
#include <string>

namespace oid {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A numeric solve detected rank deficiency (pivot below tolerance).
struct SingularMatrixError : Error {
    using Error::Error;
};

/// A rank-one update would make the maintained matrix singular, or a
/// downdate would leave it indefinite.
struct DegenerateUpdateError : Error {
    using Error::Error;
};

/// Input expected to be symmetric is not, beyond tolerance.
struct NotSymmetricError : Error {
    using Error::Error;
};

/// Training or fold-in produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

/// A baseline was asked to run without the metadata it needs.
struct MissingMetadataError : Error {
    using Error::Error;
};

/// Malformed input file; message carries the line number.
struct ParseError : Error {
    using Error::Error;
};

/// Precondition or argument violation.
struct InvalidArgumentError : Error {
    using Error::Error;
};

}  // namespace oid
