#pragma once

#include <cstddef>
#include <string>

namespace veristage {

enum class DiagKind {
    NearMiss,         // token resembles a label but fails the grammar
    OrphanLabel,      // CK before any FC, or FC before any FG
    DuplicateSibling, // same name twice under one parent
    UnresolvedLabel,  // coverage label with no resolvable FG/FC context
};

const char* to_string(DiagKind kind);

/// A non-fatal finding attached to a byte offset in a source file.
/// Lexing and parsing stay total; policy (warning vs. hard failure)
/// lives in the checkers.
struct Diagnostic {
    DiagKind kind;
    std::string message;
    std::string file; // empty when the source is not file-bound
    std::size_t offset = 0;

    bool operator==(const Diagnostic&) const = default;
};

} // namespace veristage
