#include "veristage/scaffold.hpp"

#include <fstream>

#include "veristage/errors.hpp"

namespace veristage::scaffold {

namespace {

const char* kWorkflowYaml = R"=(# veristage default workflow: 31 gated stages across four phases.
# Dotted-by-convention stages (mocks, manual plan review) are skippable and
# skipped by default; remove them from `skip` to enable them.
version: "1"

allowed_commands: ["./run_tests.sh"]
command_timeout_s: 120

skip: [plan_review, mock_design, mock_implementation, mock_selftest]

stages:
  # --- phase 1: requirement analysis and functional decomposition ------------
  - name: read_design_brief
    phase: requirement_analysis_and_functional_decomposition
    description: Read docs/design_brief.md and summarize the DUT behavior.
    tips: Keep the summary short; list operations and status flags.
    outputs: [notes/brief_summary.md]
    checkers:
      - kind: file_exists
        params: { path: notes/brief_summary.md }
  - name: interface_inventory
    phase: requirement_analysis_and_functional_decomposition
    description: Enumerate the DUT entry points and their argument/result shapes.
    outputs: [notes/interface_inventory.md]
    checkers:
      - kind: file_exists
        params: { path: notes/interface_inventory.md }
  - name: specification_analysis
    phase: requirement_analysis_and_functional_decomposition
    description: Produce the annotated specification analysis document.
    tips: >
      The gate runs after the substages: docs/spec_analysis.md must carry a
      complete FG/FC/CK hierarchy with at least one function group.
    outputs: [docs/spec_analysis.md]
    checkers:
      - kind: label_syntax
        params: { document: docs/spec_analysis.md }
    substages:
      - name: function_point_extraction
        phase: requirement_analysis_and_functional_decomposition
        description: Extract every verifiable function point from the brief.
        outputs: [notes/function_points.md]
        checkers:
          - kind: file_exists
            params: { path: notes/function_points.md }
      - name: function_grouping
        phase: requirement_analysis_and_functional_decomposition
        description: Group the function points into scenario categories.
        outputs: [notes/function_groups.md]
        checkers:
          - kind: file_exists
            params: { path: notes/function_groups.md }
      - name: checkpoint_annotation
        phase: requirement_analysis_and_functional_decomposition
        description: >
          Write docs/spec_analysis.md, annotating every function point with
          FG/FC/CK labels.
        tips: Label names are uppercase; reuse the brief's terminology exactly.
        outputs: [docs/spec_analysis.md]
        checkers:
          - kind: file_exists
            params: { path: docs/spec_analysis.md }
  - name: verification_plan
    phase: requirement_analysis_and_functional_decomposition
    description: Write the verification plan covering order of attack and risks.
    outputs: [docs/verification_plan.md]
    checkers:
      - kind: file_exists
        params: { path: docs/verification_plan.md }
  - name: plan_review
    phase: requirement_analysis_and_functional_decomposition
    description: Human review of the verification plan.
    skippable: true
    checkers:
      - kind: manual_gate
        params: { token_file: review/plan.approved }

  # --- phase 2: verification infrastructure construction ---------------------
  - name: workspace_layout
    phase: verification_infrastructure_construction
    description: Lay out the workspace directories and note their purpose.
    outputs: [notes/workspace_layout.md]
    checkers:
      - kind: file_exists
        params: { path: notes/workspace_layout.md }
  - name: dut_api_wrapper
    phase: verification_infrastructure_construction
    description: Document the wrapped DUT API exposed by dut/tinyalu.sh.
    outputs: [notes/dut_api.md]
    checkers:
      - kind: file_exists
        params: { path: notes/dut_api.md }
  - name: wrapper_smoke_test
    phase: verification_infrastructure_construction
    description: Run the smoke test to prove the wrapper drives the DUT.
    checkers:
      - kind: command
        params:
          command: ./run_tests.sh
          args: [--smoke, --out, reports/smoke.json]
          timeout_s: 60
          report_path: reports/smoke.json
  - name: fixture_setup
    phase: verification_infrastructure_construction
    description: Describe the fixtures shared by the testcases.
    outputs: [notes/fixtures.md]
    checkers:
      - kind: file_exists
        params: { path: notes/fixtures.md }
  - name: mock_design
    phase: verification_infrastructure_construction
    description: Design mocks for DUT dependencies (complex modules only).
    skippable: true
    outputs: [mocks/mock_design.md]
    checkers:
      - kind: file_exists
        params: { path: mocks/mock_design.md }
  - name: mock_implementation
    phase: verification_infrastructure_construction
    description: Implement the mocks.
    skippable: true
    outputs: [mocks/mock_impl.md]
    checkers:
      - kind: file_exists
        params: { path: mocks/mock_impl.md }
  - name: mock_selftest
    phase: verification_infrastructure_construction
    description: Self-test the mocks against the wrapper.
    skippable: true
    checkers:
      - kind: command
        params:
          command: ./run_tests.sh
          args: [--smoke, --out, reports/mock_smoke.json]
          timeout_s: 60
          report_path: reports/mock_smoke.json
  - name: infrastructure_review
    phase: verification_infrastructure_construction
    description: Record the infrastructure review outcome.
    outputs: [notes/infrastructure_review.md]
    checkers:
      - kind: file_exists
        params: { path: notes/infrastructure_review.md }

  # --- phase 3: coverage and verification interface construction -------------
  - name: coverage_plan
    phase: coverage_and_verification_interface_construction
    description: Plan the functional coverage model.
    outputs: [notes/coverage_plan.md]
    checkers:
      - kind: file_exists
        params: { path: notes/coverage_plan.md }
  - name: covergroup_definition
    phase: coverage_and_verification_interface_construction
    description: >
      Write coverage/covergroups.txt naming one covergroup per function
      group, one coverpoint per function checkpoint, one bin per check point.
    tips: Reuse the specification labels exactly; the next gate diffs them.
    outputs: [coverage/covergroups.txt]
    checkers:
      - kind: file_exists
        params: { path: coverage/covergroups.txt }
  - name: coverage_model_generation
    phase: coverage_and_verification_interface_construction
    description: Bring the coverage model into exact agreement with the spec.
    tips: >
      The gate reports omissions (spec labels missing from coverage) and
      hallucinations (coverage labels absent from the spec); repair both.
    checkers:
      - kind: coverage_consistency
        params:
          spec_document: docs/spec_analysis.md
          coverage_files: [coverage/covergroups.txt]
  - name: coverage_review
    phase: coverage_and_verification_interface_construction
    description: Record the coverage review.
    outputs: [notes/coverage_review.md]
    checkers:
      - kind: file_exists
        params: { path: notes/coverage_review.md }
  - name: verification_api_design
    phase: coverage_and_verification_interface_construction
    description: Design the callable verification API over the wrapper.
    outputs: [notes/api_design.md]
    checkers:
      - kind: file_exists
        params: { path: notes/api_design.md }
  - name: verification_api_implementation
    phase: coverage_and_verification_interface_construction
    description: Implement the verification API.
    outputs: [notes/api_impl.md]
    checkers:
      - kind: file_exists
        params: { path: notes/api_impl.md }
  - name: api_unit_test
    phase: coverage_and_verification_interface_construction
    description: Unit-test the verification API via the smoke runner.
    checkers:
      - kind: command
        params:
          command: ./run_tests.sh
          args: [--smoke, --out, reports/api_smoke.json]
          timeout_s: 60
          report_path: reports/api_smoke.json

  # --- phase 4: testcase development and execution ----------------------------
  - name: test_template_generation
    phase: testcase_development_and_execution
    description: Generate the testcase table template.
    outputs: [tests/template.tsv]
    checkers:
      - kind: file_exists
        params: { path: tests/template.tsv }
  - name: basic_testcase_implementation
    phase: testcase_development_and_execution
    description: Implement the basic testcases in tests/cases.tsv.
    tips: One line per case; mark the qualified check point each case verifies.
    outputs: [tests/cases.tsv]
    checkers:
      - kind: file_exists
        params: { path: tests/cases.tsv }
  - name: targeted_testcase_implementation
    phase: testcase_development_and_execution
    description: Extend tests/cases.tsv until every check point is exercised.
    outputs: [tests/cases.tsv]
    checkers:
      - kind: file_exists
        params: { path: tests/cases.tsv }
  - name: testcase_execution
    phase: testcase_development_and_execution
    description: Execute the testcases and produce the machine-readable report.
    checkers:
      - kind: command
        params:
          command: ./run_tests.sh
          args: [--out, reports/report.json]
          timeout_s: 60
          report_path: reports/report.json
  - name: coverage_closure_review
    phase: testcase_development_and_execution
    description: Review the execution results against the coverage plan.
    outputs: [notes/closure_review.md]
    checkers:
      - kind: file_exists
        params: { path: notes/closure_review.md }
  - name: bug_analysis
    phase: testcase_development_and_execution
    description: >
      Write docs/bug_analysis.md tracing every failing testcase back to its
      check points (state explicitly when there are no failures).
    outputs: [docs/bug_analysis.md]
    checkers:
      - kind: file_exists
        params: { path: docs/bug_analysis.md }
  - name: report_closure
    phase: testcase_development_and_execution
    description: Close the loop between spec, report and bug analysis.
    tips: >
      The gate enforces that every mark exists in the spec, every spec check
      point is exercised, and every failing mark is logged in the bug
      analysis document.
    checkers:
      - kind: test_report_closure
        params:
          spec_document: docs/spec_analysis.md
          report: reports/report.json
          bug_document: docs/bug_analysis.md
  - name: final_summary
    phase: testcase_development_and_execution
    description: Write the final verification report.
    outputs: [docs/final_report.md]
    checkers:
      - kind: file_exists
        params: { path: docs/final_report.md }
)=";

const char* kDesignBrief = R"=(# tinyalu design brief

tinyalu is an 8-bit arithmetic unit with two operations and four status
flags. It is implemented as a plain shell library (dut/tinyalu.sh) so the
whole workflow runs without any hardware toolchain.

Operations (all operands are unsigned 8-bit integers):

- `alu_add a b` prints `sum carry zero`:
  sum = (a + b) mod 256; carry = 1 when a + b > 255; zero = 1 when sum == 0.
- `alu_sub a b` prints `diff borrow negative`:
  diff = (a - b) mod 256; borrow = 1 when a < b; negative = bit 7 of diff.

Suggested traceability annotation of the behavior above:

## <FG-ARITHMETIC> arithmetic operations

### <FC-ADD> 8-bit addition with carry
- <CK-BASIC> small operands add without carry
- <CK-CARRY> operand sum above 255 wraps and sets carry
- <CK-ZERO> zero result sets the zero flag

### <FC-SUB> 8-bit subtraction with borrow
- <CK-BASIC> small operands subtract cleanly
- <CK-BORROW> subtrahend above minuend sets borrow
- <CK-NEGATIVE> bit 7 of the difference sets the negative flag
)=";

const char* kDutModule = R"=(# tinyalu: 8-bit ALU as a shell library. Sourced by run_tests.sh.

alu_add() {
    a=$1
    b=$2
    sum=$(( (a + b) & 255 ))
    carry=$(( (a + b) > 255 ? 1 : 0 ))
    zero=$(( sum == 0 ? 1 : 0 ))
    echo "$sum $carry $zero"
}

alu_sub() {
    a=$1
    b=$2
    diff=$(( (a - b) & 255 ))
    borrow=$(( a < b ? 1 : 0 ))
    negative=$(( (diff & 128) != 0 ? 1 : 0 ))
    echo "$diff $borrow $negative"
}
)=";

// Tab-separated case table: name op a b "expected output" marks(csv or -).
// The runner exits non-zero only for usage errors; failing cases are data in
// the report so the closure gate can demand bug-analysis tracing.
const char* kTestRunner = R"=(#!/bin/sh
# tinyalu test runner. Emits a machine-readable report:
#   { "cases": [ { "name", "status", "marks": [..], "duration_s" } ] }
# usage: run_tests.sh [--smoke] [--out FILE]
set -eu

. ./dut/tinyalu.sh

smoke=0
out=reports/report.json
while [ $# -gt 0 ]; do
    case "$1" in
        --smoke) smoke=1 ;;
        --out) out=$2; shift ;;
        *) echo "unknown argument: $1" >&2; exit 2 ;;
    esac
    shift
done

mkdir -p "$(dirname "$out")"
first=1
printf '{"cases":[' > "$out.tmp"

emit_case() {
    name=$1; status=$2; marks=$3
    [ "$first" -eq 1 ] || printf ',' >> "$out.tmp"
    first=0
    printf '{"name":"%s","status":"%s","marks":[' "$name" "$status" >> "$out.tmp"
    if [ "$marks" != "-" ]; then
        mfirst=1
        oldifs=$IFS
        IFS=','
        for m in $marks; do
            [ "$mfirst" -eq 1 ] || printf ',' >> "$out.tmp"
            mfirst=0
            printf '"%s"' "$m" >> "$out.tmp"
        done
        IFS=$oldifs
    fi
    printf '],"duration_s":0}' >> "$out.tmp"
}

if [ "$smoke" -eq 1 ]; then
    got=$(alu_add 1 2)
    if [ "$got" = "3 0 0" ]; then emit_case smoke_add pass -; else emit_case smoke_add fail -; fi
    got=$(alu_sub 5 3)
    if [ "$got" = "2 0 0" ]; then emit_case smoke_sub pass -; else emit_case smoke_sub fail -; fi
else
    if [ ! -f tests/cases.tsv ]; then
        echo "tests/cases.tsv missing; write it before running" >&2
        exit 3
    fi
    tab=$(printf '\t')
    while IFS="$tab" read -r name op a b expect marks; do
        case "$name" in ''|'#'*) continue ;; esac
        got=$("alu_$op" "$a" "$b")
        if [ "$got" = "$expect" ]; then status=pass; else status=fail; fi
        emit_case "$name" "$status" "$marks"
    done < tests/cases.tsv
fi

printf ']}\n' >> "$out.tmp"
mv "$out.tmp" "$out"
echo "report written to $out"
)=";

const char* kCoverageStub = R"=(# functional coverage model for tinyalu
# Reuse the specification labels exactly: one covergroup per function group,
# one coverpoint per function checkpoint, one bin per check point.
# The covergroup_definition stage replaces this stub.
)=";

const char* kAnnotatedSpec = R"=(# tinyalu specification analysis

Every function point below carries its traceability labels.

## <FG-ARITHMETIC> arithmetic operations

### <FC-ADD> 8-bit addition with carry
- <CK-BASIC> small operands add without carry
- <CK-CARRY> operand sum above 255 wraps and sets carry
- <CK-ZERO> zero result sets the zero flag

### <FC-SUB> 8-bit subtraction with borrow
- <CK-BASIC> small operands subtract cleanly
- <CK-BORROW> subtrahend above minuend sets borrow
- <CK-NEGATIVE> bit 7 of the difference sets the negative flag
)=";

const char* kCoverageWrong = R"=(covergroup <FG-ARITHMETIC>
  coverpoint <FC-ADD>
    bin <CK-BASIC>
    bin <CK-OVERFLOW>
    bin <CK-ZERO>
  coverpoint <FC-SUB>
    bin <CK-BASIC>
    bin <CK-BORROW>
    bin <CK-NEGATIVE>
)=";

const char* kCoverageFixed = R"=(covergroup <FG-ARITHMETIC>
  coverpoint <FC-ADD>
    bin <CK-BASIC>
    bin <CK-CARRY>
    bin <CK-ZERO>
  coverpoint <FC-SUB>
    bin <CK-BASIC>
    bin <CK-BORROW>
    bin <CK-NEGATIVE>
)=";

const char* kCasesTsvBasic =
    "# name\top\ta\tb\texpected\tmarks\n"
    "add_basic\tadd\t1\t2\t3 0 0\tFG-ARITHMETIC/FC-ADD/CK-BASIC\n"
    "sub_basic\tsub\t5\t3\t2 0 0\tFG-ARITHMETIC/FC-SUB/CK-BASIC\n";

const char* kCasesTsvFull =
    "# name\top\ta\tb\texpected\tmarks\n"
    "add_basic\tadd\t1\t2\t3 0 0\tFG-ARITHMETIC/FC-ADD/CK-BASIC\n"
    "add_carry\tadd\t200\t100\t44 1 0\tFG-ARITHMETIC/FC-ADD/CK-CARRY\n"
    "add_zero\tadd\t0\t0\t0 0 1\tFG-ARITHMETIC/FC-ADD/CK-ZERO\n"
    "sub_basic\tsub\t5\t3\t2 0 0\tFG-ARITHMETIC/FC-SUB/CK-BASIC\n"
    "sub_borrow\tsub\t3\t5\t254 1 1\tFG-ARITHMETIC/FC-SUB/CK-BORROW\n"
    "sub_negative\tsub\t0\t128\t128 1 1\tFG-ARITHMETIC/FC-SUB/CK-NEGATIVE\n";

const char* kTemplateTsv =
    "# testcase table template: tab-separated\n"
    "# name\top\ta\tb\texpected\tmarks (comma-separated qualified paths, or -)\n";

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out)
        throw Error("scaffold write failed: " + p.string());
}

} // namespace

std::string default_workflow_yaml() { return kWorkflowYaml; }
std::string design_brief_text() { return kDesignBrief; }
std::string dut_module_text() { return kDutModule; }
std::string test_runner_text() { return kTestRunner; }
std::string coverage_stub_text() { return kCoverageStub; }
std::string annotated_spec_text() { return kAnnotatedSpec; }

gateway::ScriptedTrace golden_trace() {
    using gateway::ToolArgs;
    gateway::ScriptedTrace trace;
    int n = 0;
    auto step = [&](const std::string& tool, ToolArgs args = {}) {
        gateway::ToolRequest req;
        req.id = "g" + std::to_string(++n);
        req.tool = tool;
        req.args = std::move(args);
        trace.steps.push_back({std::move(req), gateway::ToolStatus::Ok});
    };
    auto write = [&](const std::string& path, const std::string& content) {
        step("WriteArtifact", {{"path", path}, {"content", content}});
    };
    auto note = [&](const std::string& path, const std::string& body) {
        write(path, body + "\n");
    };

    // phase 1 -------------------------------------------------------------
    step("GetCurrentTips");
    step("Check"); // deliberate failure: summary not written yet
    note("notes/brief_summary.md",
         "tinyalu: 8-bit add/sub unit with carry, zero, borrow and negative flags.");
    step("Complete");

    step("GetCurrentTips");
    note("notes/interface_inventory.md",
         "alu_add a b -> sum carry zero\nalu_sub a b -> diff borrow negative");
    step("Complete");

    step("GetCurrentTips");
    note("notes/function_points.md",
         "- addition result and carry\n- addition zero flag\n"
         "- subtraction result and borrow\n- subtraction negative flag");
    step("Complete");

    step("GetCurrentTips");
    note("notes/function_groups.md",
         "single scenario category: arithmetic (addition, subtraction)");
    step("Complete");

    step("GetCurrentTips");
    write("docs/spec_analysis.md", kAnnotatedSpec);
    step("Complete");

    // parent gate of specification_analysis
    step("GetCurrentTips");
    step("Check");
    step("Complete");

    step("GetCurrentTips");
    note("docs/verification_plan.md",
         "Verify ADD then SUB; one testcase per check point; close with the report gate.");
    step("Complete");

    // phase 2 -------------------------------------------------------------
    step("GetCurrentTips");
    note("notes/workspace_layout.md",
         "docs/ analysis + reports; coverage/ model; tests/ case table; reports/ runner output");
    step("Complete");

    step("GetCurrentTips");
    note("notes/dut_api.md", "dut/tinyalu.sh exposes alu_add and alu_sub; both print flag triples.");
    step("Complete");

    step("GetCurrentTips");
    step("Complete"); // wrapper_smoke_test: the command gate runs the runner

    step("GetCurrentTips");
    note("notes/fixtures.md", "stateless DUT; no fixtures beyond the case table");
    step("Complete");

    step("GetCurrentTips");
    note("notes/infrastructure_review.md", "infrastructure reviewed: smoke test green");
    step("Complete");

    // phase 3 -------------------------------------------------------------
    step("GetCurrentTips");
    note("notes/coverage_plan.md",
         "mirror the spec hierarchy: 1 covergroup, 2 coverpoints, 6 bins");
    step("Complete");

    step("GetCurrentTips");
    write("coverage/covergroups.txt", kCoverageWrong); // renamed CARRY -> OVERFLOW
    step("Complete");                                  // file exists, so this gate passes

    step("GetCurrentTips");
    step("Check"); // deliberate failure: omission CK-CARRY, hallucination CK-OVERFLOW
    write("coverage/covergroups.txt", kCoverageFixed);
    step("Complete");

    step("GetCurrentTips");
    note("notes/coverage_review.md", "coverage model matches the spec exactly");
    step("Complete");

    step("GetCurrentTips");
    note("notes/api_design.md", "run_case(name, op, a, b, expected) driven from the case table");
    step("Complete");

    step("GetCurrentTips");
    note("notes/api_impl.md", "implemented inside run_tests.sh (emit_case + table loop)");
    step("Complete");

    step("GetCurrentTips");
    step("Complete"); // api_unit_test command gate

    // phase 4 -------------------------------------------------------------
    step("GetCurrentTips");
    write("tests/template.tsv", kTemplateTsv);
    step("Complete");

    step("GetCurrentTips");
    write("tests/cases.tsv", kCasesTsvBasic);
    step("Complete");

    step("GetCurrentTips");
    write("tests/cases.tsv", kCasesTsvFull);
    step("Complete");

    step("GetCurrentTips");
    step("RunTest", {{"report_path", std::string("reports/report.json")}});
    step("Complete");

    step("GetCurrentTips");
    note("notes/closure_review.md", "all six check points exercised; zero failures");
    step("Complete");

    step("GetCurrentTips");
    note("docs/bug_analysis.md", "All testcases pass; no failures to trace.");
    step("Complete");

    step("GetCurrentTips");
    step("Check");
    step("Complete");

    step("GetCurrentTips");
    note("docs/final_report.md",
         "tinyalu verified: 6/6 check points exercised, consistency diff empty.");
    step("Complete");

    step("Status");
    return trace;
}

void init_workspace(const std::filesystem::path& dir, bool force) {
    std::error_code ec;
    if (std::filesystem::exists(dir) && !std::filesystem::is_directory(dir))
        throw TargetNotEmpty("init target is not a directory: " + dir.string());
    if (std::filesystem::is_directory(dir) && !std::filesystem::is_empty(dir, ec) && !force)
        throw TargetNotEmpty("init target is not empty: " + dir.string() +
                             " (pass --force to scaffold anyway)");
    std::filesystem::create_directories(dir);

    write_file(dir / "workflow.yaml", kWorkflowYaml);
    write_file(dir / "docs" / "design_brief.md", kDesignBrief);
    write_file(dir / "dut" / "tinyalu.sh", kDutModule);
    write_file(dir / "run_tests.sh", kTestRunner);
    write_file(dir / "coverage" / "covergroups.txt", kCoverageStub);
    write_file(dir / "traces" / "golden.json", gateway::trace_to_json(golden_trace()));

    std::filesystem::permissions(dir / "run_tests.sh",
                                 std::filesystem::perms::owner_all |
                                     std::filesystem::perms::group_read |
                                     std::filesystem::perms::group_exec |
                                     std::filesystem::perms::others_read |
                                     std::filesystem::perms::others_exec);
}

} // namespace veristage::scaffold
