#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veristage/diagnostics.hpp"

namespace veristage::labels {

// Traceability labels form a three-level hierarchy:
//   FG (function group) > FC (function checkpoint) > CK (check point).
// A label renders as `<FG-NAME>`; a fully qualified check point renders as
// the path `FG-x/FC-y/CK-z`. Names are uppercase tokens: a leading
// alphanumeric followed by alphanumerics, underscores or hyphens.

enum class LabelLevel { FG, FC, CK };

const char* to_string(LabelLevel level);

/// True iff `name` matches `[A-Z0-9][A-Z0-9_-]*`.
bool is_valid_name(std::string_view name);

struct Label {
    LabelLevel level;
    std::string name;

    /// Exact token form, e.g. `<FG-ARITHMETIC>`. Round-trips through the lexer.
    std::string render() const;

    auto operator<=>(const Label&) const = default;
};

/// Validating constructor; throws std::invalid_argument on a bad name.
Label make_label(LabelLevel level, std::string_view name);

/// One FG/FC/CK path. Stores the three names; levels are implied by position.
struct QualifiedCheck {
    std::string fg;
    std::string fc;
    std::string ck;

    /// Canonical form `FG-x/FC-y/CK-z`; unique key within one tree.
    std::string path() const;

    auto operator<=>(const QualifiedCheck&) const = default;
};

using PathSet = std::set<QualifiedCheck>;

/// Strict parse of a `FG-x/FC-y/CK-z` path string. Returns nullopt on any
/// deviation (missing segment, wrong level order, bad name).
std::optional<QualifiedCheck> parse_qualified_path(std::string_view text);

/// The FG > FC > CK hierarchy extracted from one document. Ordering follows
/// the document; sibling names are unique per parent.
struct LabelTree {
    struct Checkpoint {
        std::string name;
        std::vector<std::string> checks; // CK names
        bool operator==(const Checkpoint&) const = default;
    };
    struct Group {
        std::string name;
        std::vector<Checkpoint> checkpoints;
        bool operator==(const Group&) const = default;
    };

    std::vector<Group> groups;

    bool operator==(const LabelTree&) const = default;

    bool empty() const { return groups.empty(); }
    std::size_t group_count() const { return groups.size(); }
    std::size_t checkpoint_count() const;
    std::size_t check_count() const;

    /// FG name of the group containing checkpoint `fc`, if exactly one group
    /// does. Used for diagnostic hints only.
    std::optional<std::string> parent_of_checkpoint(std::string_view fc) const;
};

struct LexedLabel {
    Label label;
    std::size_t offset; // byte offset of `<` in the input
};

struct LexResult {
    std::vector<LexedLabel> labels;
    std::vector<Diagnostic> warnings; // near-misses, in document order
};

/// Scans `text` for label tokens in document order. Total: malformed
/// near-misses (wrong case, empty name, illegal characters) are reported as
/// warnings, never returned as labels and never faulting the scan.
LexResult lex_labels(std::string_view text);

struct BuildTreeResult {
    LabelTree tree;
    std::vector<Diagnostic> diagnostics; // orphans and duplicate siblings
};

/// Builds the hierarchy from labels in document order using the
/// nearest-preceding rule: each FC attaches to the latest FG seen so far,
/// each CK to the latest FC. Orphans and duplicate siblings are recorded as
/// diagnostics and skipped; the tree is built from the remainder.
BuildTreeResult build_tree(std::span<const LexedLabel> ordered);

/// Every FG/FC/CK path of the tree, exactly once.
PathSet flatten(const LabelTree& tree);

/// Bidirectional difference between two flattened path sets.
struct ConsistencyDiff {
    PathSet missing; // in reference, absent in candidate (omissions)
    PathSet extra;   // in candidate, absent in reference (hallucinations)

    bool empty() const { return missing.empty() && extra.empty(); }
};

ConsistencyDiff diff_bidirectional(const PathSet& reference, const PathSet& candidate);

/// Minimal annotated document holding exactly the tree's labels, one token
/// per line. Re-parsing it reproduces the same path set.
std::string to_annotated_text(const LabelTree& tree);

} // namespace veristage::labels
