#pragma once

#include <stdexcept>
#include <string>

namespace rde {

// Exit-code mapping lives in the CLI: usage 1, format/io 2, numerical 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file contents: bad magic, truncated payload, count mismatch.
// Messages name the offending field.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem failures: unreadable or unwritable paths.
struct IoError : Error {
    using Error::Error;
};

// Inconsistent shapes or invalid domain configuration (J too large,
// empty partition group, k too large for the brute-force oracle, ...).
struct DomainError : Error {
    using Error::Error;
};

// Non-finite values where the algorithm cannot continue (KL infinity
// during relaxed optimization).
struct NumericalError : Error {
    using Error::Error;
};

// Bad command line.
struct UsageError : Error {
    using Error::Error;
};

} // namespace rde
