#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace veristage {

/// Base class for all veristage errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Workflow configuration is structurally invalid. The message carries the
/// offending field path and reason.
struct ConfigInvalid : Error {
    using Error::Error;
};

/// A checker spec names an unknown kind or carries invalid params. Distinct
/// from a failing check: misconfiguration is an operator error, a failing
/// check is agent feedback.
struct CheckerMisconfigured : Error {
    using Error::Error;
};

/// A required input file does not exist or cannot be read.
struct FileUnreadable : Error {
    using Error::Error;
};

/// A structured document violates its schema. The message names the field.
struct SchemaViolation : Error {
    using Error::Error;
};

/// A persisted state file is unparseable or violates internal invariants.
struct StateCorrupt : Error {
    using Error::Error;
};

/// The persisted state was written under a different config file.
struct DigestMismatch : Error {
    using Error::Error;
};

/// Scaffold target directory already contains files.
struct TargetNotEmpty : Error {
    using Error::Error;
};

/// A replayed trace step did not meet its expected-status assertion.
struct AssertionMismatch : Error {
    AssertionMismatch(std::size_t request_index, const std::string& what)
        : Error(what), index(request_index) {}
    std::size_t index;
};

} // namespace veristage
