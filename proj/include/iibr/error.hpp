#pragma once

#include <stdexcept>
#include <string>

namespace iibr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad index, shape mismatch, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A file on disk does not follow the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Reading, writing or running an external process failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite value or could not be solved.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace iibr
