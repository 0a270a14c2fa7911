#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "veristage/artifacts.hpp"

namespace veristage::checkers {

// A checker gates one workflow stage. It never throws on a failing artifact:
// failures come back as ordered, human-readable messages the driving agent
// can act on. Only misconfiguration (unknown kind, bad params) is an error.

enum class Severity { Error, Warning };

struct Locus {
    std::string path;
    std::size_t offset = 0;
    bool operator==(const Locus&) const = default;
};

struct CheckMessage {
    Severity severity = Severity::Error;
    std::string text;
    std::optional<Locus> locus;
    bool operator==(const CheckMessage&) const = default;
};

struct CheckResult {
    bool passed = true;
    std::vector<CheckMessage> messages;

    void fail(std::string text, std::optional<Locus> locus = std::nullopt);
    void warn(std::string text, std::optional<Locus> locus = std::nullopt);
    void merge(CheckResult other);
    std::size_t error_count() const;

    bool operator==(const CheckResult&) const = default;
};

enum class CheckerKind {
    FileExists,
    LabelSyntax,
    CoverageConsistency,
    TestReportClosure,
    Command,
    ManualGate,
};

const char* to_string(CheckerKind kind);
std::optional<CheckerKind> checker_kind_from_string(std::string_view name);

struct FileExistsParams {
    std::string path; // workspace-relative
};
struct LabelSyntaxParams {
    std::string document;
};
struct CoverageConsistencyParams {
    std::string spec_document;
    std::vector<std::string> coverage_files;
};
struct TestReportClosureParams {
    std::string spec_document;
    std::string report;
    std::string bug_document;
};
struct CommandParams {
    std::string command;
    std::vector<std::string> args;
    double timeout_s = 300.0;
    std::optional<std::string> report_path; // must parse as a TestReport when set
    std::size_t output_tail_bytes = 4096;
};
struct ManualGateParams {
    std::string token_file; // must contain the single line "approved"
};

using CheckerParams =
    std::variant<FileExistsParams, LabelSyntaxParams, CoverageConsistencyParams,
                 TestReportClosureParams, CommandParams, ManualGateParams>;

struct CheckerSpec {
    CheckerKind kind;
    CheckerParams params;

    /// Short human-readable form, e.g. `label_syntax(docs/spec.md)`.
    std::string describe() const;
};

struct CheckContext {
    std::filesystem::path workspace;
    std::string stage_name;
    bool interactive = false;
    /// Interactive manual-gate hook; return true to approve. When absent,
    /// manual gates fall back to the token-file contract.
    std::function<bool(const std::string& prompt)> approve;
};

/// Dispatches to the kind-specific check. Throws CheckerMisconfigured when the
/// params variant does not match the kind; never mutates the workspace except
/// through command checkers.
CheckResult run_checker(const CheckerSpec& spec, const CheckContext& ctx);

CheckResult check_file_exists(const FileExistsParams& params, const CheckContext& ctx);

/// Fails on any lexer near-miss or hierarchy diagnostic, on zero function
/// groups, and on any group/checkpoint with no children.
CheckResult check_label_syntax(const artifacts::SpecDocument& doc);

/// Bidirectional spec-vs-coverage comparison. Omissions and hallucinations
/// are errors; unresolved coverage labels fail the check; coverage lexer
/// near-misses surface as warnings only.
CheckResult check_coverage_consistency(const artifacts::SpecDocument& spec,
                                       const artifacts::CoverageModel& cov);

/// Enforces the three closure conditions: (1) every marked check point exists
/// in the specification; (2) every specification check point is exercised by
/// a non-skipped testcase; (3) every check point marked by a failing testcase
/// appears in the bug document. Zero-mark testcases and bug-document paths
/// with no failing testcase are warnings.
CheckResult check_test_report_closure(const artifacts::SpecDocument& spec,
                                      const artifacts::TestReport& report,
                                      const artifacts::BugDocument& bugs);

CheckResult check_command(const CommandParams& params, const CheckContext& ctx);

CheckResult check_manual_gate(const ManualGateParams& params, const CheckContext& ctx);

} // namespace veristage::checkers
