#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "veristage/diagnostics.hpp"
#include "veristage/labels.hpp"

namespace veristage::artifacts {

// Parsers for the four label-bearing artifact kinds: specification analysis
// documents, coverage-model sources, test execution reports, and bug analysis
// documents. All parsers are pure functions of file contents.

/// Reads a whole file as bytes; throws FileUnreadable.
std::string read_text_file(const std::filesystem::path& path);

struct SpecDocument {
    std::filesystem::path source;
    std::string text;
    labels::LabelTree tree;
    /// Near-miss warnings and hierarchy findings in document order. Policy
    /// (escalation to failure) belongs to the label_syntax checker.
    std::vector<Diagnostic> diagnostics;
};

SpecDocument parse_spec_document(const std::filesystem::path& path);
SpecDocument parse_spec_text(std::string text, const std::string& source_name);

struct CoverageModel {
    std::vector<std::filesystem::path> sources;
    labels::PathSet paths;
    std::vector<Diagnostic> warnings;   // lexer near-misses; not escalated here
    std::vector<Diagnostic> unresolved; // labels lacking FG/FC context
};

/// Scans the coverage sources as plain text for label tokens, in file-then-
/// document order, resolving each CK against the nearest preceding FG/FC.
/// `spec_tree` is consulted only to annotate unresolved findings with a hint.
CoverageModel parse_coverage_model(const std::vector<std::filesystem::path>& paths,
                                   const labels::LabelTree& spec_tree);

enum class TestStatus { Pass, Fail, Skip };

const char* to_string(TestStatus status);

struct TestCase {
    std::string name;
    TestStatus status = TestStatus::Pass;
    std::set<std::string> marks; // fully-qualified FG-*/FC-*/CK-* path strings
    double duration_s = 0.0;
};

struct TestReport {
    std::vector<TestCase> cases;
};

/// Parses the structured test report. Schema (one JSON document per run):
///   { "cases": [ { "name": string, "status": "pass"|"fail"|"skip",
///                  "marks": [string...], "duration_s": number >= 0 } ] }
/// `marks` and `duration_s` are optional; unknown extra fields are ignored;
/// case names must be unique; every mark must parse as a qualified path.
/// Throws SchemaViolation (with the offending field path) or FileUnreadable.
TestReport parse_test_report(const std::filesystem::path& path);
TestReport parse_test_report_text(const std::string& json_text, const std::string& source_name);

struct BugDocument {
    std::filesystem::path source;
    labels::PathSet referenced;
};

/// Extracts every cited check point: both bare `FG-x/FC-y/CK-z` path strings
/// and inline label triples under nearest-preceding resolution, deduplicated.
BugDocument parse_bug_document(const std::filesystem::path& path);
BugDocument parse_bug_text(const std::string& text, const std::filesystem::path& source);

} // namespace veristage::artifacts
