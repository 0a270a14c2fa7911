#include "veristage/checkers.hpp"

#include <algorithm>

#include "veristage/errors.hpp"
#include "veristage/process.hpp"

namespace veristage::checkers {

void CheckResult::fail(std::string text, std::optional<Locus> locus) {
    passed = false;
    messages.push_back({Severity::Error, std::move(text), std::move(locus)});
}

void CheckResult::warn(std::string text, std::optional<Locus> locus) {
    messages.push_back({Severity::Warning, std::move(text), std::move(locus)});
}

void CheckResult::merge(CheckResult other) {
    passed = passed && other.passed;
    for (auto& m : other.messages)
        messages.push_back(std::move(m));
}

std::size_t CheckResult::error_count() const {
    return static_cast<std::size_t>(
        std::count_if(messages.begin(), messages.end(),
                      [](const CheckMessage& m) { return m.severity == Severity::Error; }));
}

const char* to_string(CheckerKind kind) {
    switch (kind) {
    case CheckerKind::FileExists: return "file_exists";
    case CheckerKind::LabelSyntax: return "label_syntax";
    case CheckerKind::CoverageConsistency: return "coverage_consistency";
    case CheckerKind::TestReportClosure: return "test_report_closure";
    case CheckerKind::Command: return "command";
    case CheckerKind::ManualGate: return "manual_gate";
    }
    return "??";
}

std::optional<CheckerKind> checker_kind_from_string(std::string_view name) {
    if (name == "file_exists") return CheckerKind::FileExists;
    if (name == "label_syntax") return CheckerKind::LabelSyntax;
    if (name == "coverage_consistency") return CheckerKind::CoverageConsistency;
    if (name == "test_report_closure") return CheckerKind::TestReportClosure;
    if (name == "command") return CheckerKind::Command;
    if (name == "manual_gate") return CheckerKind::ManualGate;
    return std::nullopt;
}

std::string CheckerSpec::describe() const {
    std::string out(to_string(kind));
    out += '(';
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FileExistsParams>) {
                out += p.path;
            } else if constexpr (std::is_same_v<T, LabelSyntaxParams>) {
                out += p.document;
            } else if constexpr (std::is_same_v<T, CoverageConsistencyParams>) {
                out += p.spec_document + " vs";
                for (const auto& f : p.coverage_files)
                    out += " " + f;
            } else if constexpr (std::is_same_v<T, TestReportClosureParams>) {
                out += p.spec_document + ", " + p.report + ", " + p.bug_document;
            } else if constexpr (std::is_same_v<T, CommandParams>) {
                out += p.command;
                for (const auto& a : p.args)
                    out += " " + a;
            } else if constexpr (std::is_same_v<T, ManualGateParams>) {
                out += p.token_file;
            }
        },
        params);
    out += ')';
    return out;
}

CheckResult check_file_exists(const FileExistsParams& params, const CheckContext& ctx) {
    CheckResult r;
    auto full = ctx.workspace / params.path;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(full, ec))
        r.fail("required file missing: " + params.path, Locus{params.path, 0});
    return r;
}

CheckResult check_label_syntax(const artifacts::SpecDocument& doc) {
    CheckResult r;
    // Near-misses and hierarchy findings escalate to failures here: the
    // specification analysis document is where naming discipline starts.
    for (const auto& d : doc.diagnostics)
        r.fail(d.message, Locus{d.file, d.offset});
    if (doc.tree.groups.empty()) {
        r.fail("at least one function group required", Locus{doc.source.string(), 0});
        return r;
    }
    for (const auto& g : doc.tree.groups) {
        if (g.checkpoints.empty())
            r.fail("function group has no function checkpoints: FG-" + g.name,
                   Locus{doc.source.string(), 0});
        for (const auto& c : g.checkpoints)
            if (c.checks.empty())
                r.fail("function checkpoint has no check points: FG-" + g.name + "/FC-" + c.name,
                       Locus{doc.source.string(), 0});
    }
    return r;
}

CheckResult check_coverage_consistency(const artifacts::SpecDocument& spec,
                                       const artifacts::CoverageModel& cov) {
    CheckResult r;
    for (const auto& w : cov.warnings)
        r.warn(w.message, Locus{w.file, w.offset});
    for (const auto& u : cov.unresolved)
        r.fail(u.message, Locus{u.file, u.offset});

    auto diff = labels::diff_bidirectional(labels::flatten(spec.tree), cov.paths);
    for (const auto& p : diff.missing)
        r.fail("omission: " + p.path(), Locus{spec.source.string(), 0});
    for (const auto& p : diff.extra)
        r.fail("hallucination or naming mistake: " + p.path());
    return r;
}

CheckResult check_test_report_closure(const artifacts::SpecDocument& spec,
                                      const artifacts::TestReport& report,
                                      const artifacts::BugDocument& bugs) {
    CheckResult r;
    std::set<std::string> spec_paths;
    for (const auto& p : labels::flatten(spec.tree))
        spec_paths.insert(p.path());
    std::set<std::string> bug_paths;
    for (const auto& p : bugs.referenced)
        bug_paths.insert(p.path());

    // (1) every marked check point exists in the specification
    for (const auto& tc : report.cases)
        for (const auto& mark : tc.marks)
            if (!spec_paths.count(mark))
                r.fail("marked check point not in specification: " + mark + " (testcase " +
                       tc.name + ")");

    // (2) every specification check point is exercised by a non-skipped case
    std::set<std::string> exercised;
    for (const auto& tc : report.cases)
        if (tc.status != artifacts::TestStatus::Skip)
            exercised.insert(tc.marks.begin(), tc.marks.end());
    for (const auto& path : spec_paths)
        if (!exercised.count(path))
            r.fail("unexercised check point: " + path);

    // (3) every check point marked by a failing case appears in the bug document
    std::set<std::string> failing_marks;
    for (const auto& tc : report.cases) {
        if (tc.status != artifacts::TestStatus::Fail)
            continue;
        for (const auto& mark : tc.marks) {
            failing_marks.insert(mark);
            if (!bug_paths.count(mark))
                r.fail("untraced failure: " + mark + " (testcase " + tc.name + ")");
        }
    }

    for (const auto& tc : report.cases)
        if (tc.marks.empty())
            r.warn("testcase marks no check points: " + tc.name);
    // Reverse direction of (3) is informational only.
    for (const auto& path : bug_paths)
        if (!failing_marks.count(path))
            r.warn("bug document cites a check point with no failing testcase: " + path);
    return r;
}

CheckResult check_command(const CommandParams& params, const CheckContext& ctx) {
    CheckResult r;
    std::vector<std::string> argv;
    argv.push_back(params.command);
    argv.insert(argv.end(), params.args.begin(), params.args.end());

    std::string cmdline = params.command;
    for (const auto& a : params.args)
        cmdline += " " + a;

    auto res = proc::run_process(argv, ctx.workspace, params.timeout_s, params.output_tail_bytes);
    if (res.timed_out) {
        r.fail("command timed out after " + std::to_string(params.timeout_s) + "s: " + cmdline);
    } else if (res.exit_code != 0) {
        r.fail("command failed with exit code " + std::to_string(res.exit_code) + ": " + cmdline);
    }
    if (!r.passed && !res.output.empty())
        r.messages.push_back({Severity::Error, "output tail:\n" + res.output, std::nullopt});

    if (r.passed && params.report_path) {
        auto report_file = ctx.workspace / *params.report_path;
        if (!std::filesystem::is_regular_file(report_file)) {
            r.fail("expected report not produced: " + *params.report_path,
                   Locus{*params.report_path, 0});
        } else {
            try {
                artifacts::parse_test_report(report_file);
            } catch (const Error& e) {
                r.fail(std::string("produced report is invalid: ") + e.what(),
                       Locus{*params.report_path, 0});
            }
        }
    }
    return r;
}

CheckResult check_manual_gate(const ManualGateParams& params, const CheckContext& ctx) {
    CheckResult r;
    if (ctx.interactive && ctx.approve) {
        if (!ctx.approve("approve stage \"" + ctx.stage_name + "\" to proceed"))
            r.fail("approval declined for stage " + ctx.stage_name);
        return r;
    }
    auto token = ctx.workspace / params.token_file;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(token, ec)) {
        r.fail("manual approval required: create " + params.token_file +
                   " containing the single line \"approved\" to proceed",
               Locus{params.token_file, 0});
        return r;
    }
    std::string content = artifacts::read_text_file(token);
    while (!content.empty() && (content.back() == '\n' || content.back() == '\r'))
        content.pop_back();
    if (content != "approved")
        r.fail("token not approved: " + params.token_file, Locus{params.token_file, 0});
    return r;
}

namespace {

template <typename T>
const T& params_as(const CheckerSpec& spec) {
    const T* p = std::get_if<T>(&spec.params);
    if (!p)
        throw CheckerMisconfigured(std::string("checker ") + to_string(spec.kind) +
                                   " has mismatched params");
    return *p;
}

// File-backed checkers parse their inputs here so a missing or malformed
// artifact becomes failing feedback the agent can fix, not a crash.
CheckResult run_label_syntax(const LabelSyntaxParams& p, const CheckContext& ctx) {
    CheckResult r;
    try {
        return check_label_syntax(artifacts::parse_spec_document(ctx.workspace / p.document));
    } catch (const FileUnreadable&) {
        r.fail("specification analysis document not found: " + p.document, Locus{p.document, 0});
        return r;
    }
}

CheckResult run_coverage_consistency(const CoverageConsistencyParams& p, const CheckContext& ctx) {
    CheckResult r;
    artifacts::SpecDocument spec;
    try {
        spec = artifacts::parse_spec_document(ctx.workspace / p.spec_document);
    } catch (const FileUnreadable&) {
        r.fail("specification analysis document not found: " + p.spec_document,
               Locus{p.spec_document, 0});
        return r;
    }
    std::vector<std::filesystem::path> files;
    for (const auto& f : p.coverage_files) {
        if (!std::filesystem::is_regular_file(ctx.workspace / f))
            r.fail("coverage source not found: " + f, Locus{f, 0});
        else
            files.push_back(ctx.workspace / f);
    }
    if (!r.passed)
        return r;
    r.merge(check_coverage_consistency(spec, artifacts::parse_coverage_model(files, spec.tree)));
    return r;
}

CheckResult run_test_report_closure(const TestReportClosureParams& p, const CheckContext& ctx) {
    CheckResult r;
    artifacts::SpecDocument spec;
    artifacts::TestReport report;
    artifacts::BugDocument bugs;
    try {
        spec = artifacts::parse_spec_document(ctx.workspace / p.spec_document);
    } catch (const FileUnreadable&) {
        r.fail("specification analysis document not found: " + p.spec_document,
               Locus{p.spec_document, 0});
    }
    try {
        report = artifacts::parse_test_report(ctx.workspace / p.report);
    } catch (const FileUnreadable&) {
        r.fail("test report not found: " + p.report, Locus{p.report, 0});
    } catch (const SchemaViolation& e) {
        r.fail(e.what(), Locus{p.report, 0});
    }
    try {
        bugs = artifacts::parse_bug_document(ctx.workspace / p.bug_document);
    } catch (const FileUnreadable&) {
        r.fail("bug analysis document not found: " + p.bug_document, Locus{p.bug_document, 0});
    }
    if (!r.passed)
        return r;
    r.merge(check_test_report_closure(spec, report, bugs));
    return r;
}

} // namespace

CheckResult run_checker(const CheckerSpec& spec, const CheckContext& ctx) {
    if (!std::filesystem::is_directory(ctx.workspace))
        throw Error("workspace does not exist: " + ctx.workspace.string());
    switch (spec.kind) {
    case CheckerKind::FileExists:
        return check_file_exists(params_as<FileExistsParams>(spec), ctx);
    case CheckerKind::LabelSyntax:
        return run_label_syntax(params_as<LabelSyntaxParams>(spec), ctx);
    case CheckerKind::CoverageConsistency:
        return run_coverage_consistency(params_as<CoverageConsistencyParams>(spec), ctx);
    case CheckerKind::TestReportClosure:
        return run_test_report_closure(params_as<TestReportClosureParams>(spec), ctx);
    case CheckerKind::Command:
        return check_command(params_as<CommandParams>(spec), ctx);
    case CheckerKind::ManualGate:
        return check_manual_gate(params_as<ManualGateParams>(spec), ctx);
    }
    throw CheckerMisconfigured("unknown checker kind");
}

} // namespace veristage::checkers
