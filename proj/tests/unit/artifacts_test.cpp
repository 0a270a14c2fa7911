#include "doctest.h"

#include <regex>

#include <json.hpp>

#include "test_util.hpp"
#include "veristage/artifacts.hpp"
#include "veristage/errors.hpp"

using namespace veristage;
using namespace veristage::artifacts;
using testutil::TempDir;
using testutil::write_file;

namespace {

const char* kAnnotatedSpec = R"(# ALU verification analysis

## <FG-ARITHMETIC> standard operations

### <FC-VFADD> vector floating-point addition
- <CK-FP32> FP32-precision addition
- <CK-FP16> FP16-precision addition
- <CK-BF16> BF16-precision addition

### <FC-VFSUB> vector floating-point subtraction
- <CK-FP32> FP32-precision subtraction
)";

// Second extraction route for bug documents, independent of the parser:
// regex for bare path strings plus the label lexer for inline triples.
labels::PathSet bug_paths_two_pass(const std::string& text) {
    labels::PathSet out;
    std::regex path_re(R"((?:^|[^A-Z0-9_-])(FG-[A-Z0-9][A-Z0-9_-]*/FC-[A-Z0-9][A-Z0-9_-]*/CK-[A-Z0-9][A-Z0-9_-]*))");
    auto it = std::sregex_iterator(text.begin(), text.end(), path_re);
    for (; it != std::sregex_iterator(); ++it)
        if (auto qc = labels::parse_qualified_path((*it)[1].str()))
            out.insert(*qc);
    std::string fg, fc;
    for (const auto& l : labels::lex_labels(text).labels) {
        switch (l.label.level) {
        case labels::LabelLevel::FG: fg = l.label.name; fc.clear(); break;
        case labels::LabelLevel::FC: if (!fg.empty()) fc = l.label.name; break;
        case labels::LabelLevel::CK:
            if (!fg.empty() && !fc.empty()) out.insert({fg, fc, l.label.name});
            break;
        }
    }
    return out;
}

} // namespace

TEST_SUITE_BEGIN("artifacts");

TEST_CASE("spec document parse builds the tree with no diagnostics") {
    TempDir dir;
    write_file(dir / "spec.md", kAnnotatedSpec);
    auto doc = parse_spec_document(dir / "spec.md");
    CHECK(doc.diagnostics.empty());
    REQUIRE(doc.tree.group_count() == 1);
    CHECK(doc.tree.checkpoint_count() == 2);
    CHECK(doc.tree.check_count() == 4);
    auto paths = labels::flatten(doc.tree);
    CHECK(paths.count({"ARITHMETIC", "VFADD", "FP32"}) == 1);
    CHECK(paths.count({"ARITHMETIC", "VFSUB", "FP32"}) == 1);
}

TEST_CASE("empty spec file parses to an empty tree with zero warnings") {
    TempDir dir;
    write_file(dir / "empty.md", "");
    auto doc = parse_spec_document(dir / "empty.md");
    CHECK(doc.tree.empty());
    CHECK(doc.diagnostics.empty());
}

TEST_CASE("orphan checkpoint in a spec becomes a diagnostic, not an exception") {
    TempDir dir;
    std::string text = "preamble text\n<CK-FP32> appears before any checkpoint\n<FG-A>\n";
    write_file(dir / "spec.md", text);
    auto doc = parse_spec_document(dir / "spec.md");
    REQUIRE(doc.diagnostics.size() == 1);
    CHECK(doc.diagnostics[0].kind == DiagKind::OrphanLabel);
    // offset confirmed by independent string search
    CHECK(doc.diagnostics[0].offset == text.find("<CK-FP32>"));
    CHECK(doc.diagnostics[0].file == (dir / "spec.md").string());
}

TEST_CASE("missing spec file raises FileUnreadable") {
    TempDir dir;
    CHECK_THROWS_AS(parse_spec_document(dir / "nope.md"), FileUnreadable);
}

TEST_CASE("parsing is deterministic") {
    TempDir dir;
    write_file(dir / "spec.md", kAnnotatedSpec);
    auto a = parse_spec_document(dir / "spec.md");
    auto b = parse_spec_document(dir / "spec.md");
    CHECK(a.tree == b.tree);
    CHECK(a.diagnostics == b.diagnostics);
}

TEST_CASE("minimal annotated rendering of a tree re-parses to the same path set") {
    testutil::Rng rng(31337);
    for (int iter = 0; iter < 100; ++iter) {
        auto tree = testutil::random_tree(rng);
        auto doc = parse_spec_text(labels::to_annotated_text(tree), "mem");
        CHECK(doc.diagnostics.empty());
        CHECK(labels::flatten(doc.tree) == labels::flatten(tree));
    }
}

TEST_CASE("coverage model extracts qualified paths from covergroup-ish source") {
    TempDir dir;
    write_file(dir / "cov.py", R"(# functional coverage model
covergroup("<FG-ARITHMETIC>")
covpoint("<FC-VFADD>")
bin("<CK-FP32>")
bin("<CK-FP16>")
bin("<CK-BF16>")
)");
    auto spec = parse_spec_text(kAnnotatedSpec, "spec");
    auto cov = parse_coverage_model({dir / "cov.py"}, spec.tree);
    CHECK(cov.unresolved.empty());
    REQUIRE(cov.paths.size() == 3);
    CHECK(cov.paths.count({"ARITHMETIC", "VFADD", "FP32"}) == 1);
    CHECK(cov.paths.count({"ARITHMETIC", "VFADD", "BF16"}) == 1);
}

TEST_CASE("empty coverage file list yields an empty path set") {
    auto spec = parse_spec_text(kAnnotatedSpec, "spec");
    auto cov = parse_coverage_model({}, spec.tree);
    CHECK(cov.paths.empty());
    CHECK(cov.warnings.empty());
    CHECK(cov.unresolved.empty());
}

TEST_CASE("coverage extraction does not consult the spec for path existence") {
    // Renamed check: extraction keeps the wrong name; diffing catches it later.
    TempDir dir;
    write_file(dir / "cov.txt", "<FG-FIFO> <FC-ERROR> <CK-OVERFLOW>");
    auto spec = parse_spec_text("<FG-FIFO> <FC-ERROR> <CK-OVERRUN>", "spec");
    auto cov = parse_coverage_model({dir / "cov.txt"}, spec.tree);
    REQUIRE(cov.paths.size() == 1);
    CHECK(cov.paths.count({"FIFO", "ERROR", "OVERFLOW"}) == 1);
}

TEST_CASE("unresolvable coverage labels are recorded, with a hint when the spec knows the name") {
    TempDir dir;
    write_file(dir / "cov.txt", "<FC-VFADD> <CK-FP32>");
    auto spec = parse_spec_text(kAnnotatedSpec, "spec");
    auto cov = parse_coverage_model({dir / "cov.txt"}, spec.tree);
    CHECK(cov.paths.empty());
    REQUIRE(cov.unresolved.size() == 2);
    CHECK(cov.unresolved[0].kind == DiagKind::UnresolvedLabel);
    CHECK(cov.unresolved[0].message.find("FG-ARITHMETIC") != std::string::npos);
    CHECK(cov.unresolved[0].file == (dir / "cov.txt").string());
}

TEST_CASE("coverage resolution state carries across files in list order") {
    TempDir dir;
    write_file(dir / "a.txt", "<FG-ARITHMETIC> <FC-VFADD>");
    write_file(dir / "b.txt", "<CK-FP32>");
    auto spec = parse_spec_text(kAnnotatedSpec, "spec");

    auto forward = parse_coverage_model({dir / "a.txt", dir / "b.txt"}, spec.tree);
    CHECK(forward.paths.size() == 1);
    CHECK(forward.unresolved.empty());

    auto backward = parse_coverage_model({dir / "b.txt", dir / "a.txt"}, spec.tree);
    CHECK(backward.paths.empty());
    CHECK(backward.unresolved.size() == 1);
}

TEST_CASE("coverage extraction is source-format agnostic") {
    const std::string wrappers[] = {
        "cg = covergroup(<FG-A>); cp = covpoint(<FC-B>); bin(<CK-C>);",
        "# <FG-A>\n## <FC-B>\n- <CK-C>\n",
        "/* <FG-A> */ int x; // <FC-B>\nstatic const char* k = \"<CK-C>\";",
    };
    auto spec = parse_spec_text("<FG-A><FC-B><CK-C>", "spec");
    labels::PathSet expected = {{"A", "B", "C"}};
    for (const auto& body : wrappers) {
        TempDir dir;
        write_file(dir / "cov", body);
        auto cov = parse_coverage_model({dir / "cov"}, spec.tree);
        CHECK(cov.paths == expected);
    }
}

TEST_CASE("test report parses the documented schema") {
    TempDir dir;
    write_file(dir / "report.json", R"({"cases":[
      {"name":"test_vfadd_fp32","status":"pass","marks":["FG-ARITHMETIC/FC-VFADD/CK-FP32"]},
      {"name":"test_vfadd_fp16","status":"fail","marks":["FG-ARITHMETIC/FC-VFADD/CK-FP16"],"duration_s":0.25},
      {"name":"test_misc","status":"skip","extra_field":"ignored"}
    ]})");
    auto report = parse_test_report(dir / "report.json");
    REQUIRE(report.cases.size() == 3);
    CHECK(report.cases[0].name == "test_vfadd_fp32");
    CHECK(report.cases[0].status == TestStatus::Pass);
    CHECK(report.cases[0].marks == std::set<std::string>{"FG-ARITHMETIC/FC-VFADD/CK-FP32"});
    CHECK(report.cases[0].duration_s == doctest::Approx(0.0));
    CHECK(report.cases[1].status == TestStatus::Fail);
    CHECK(report.cases[1].duration_s == doctest::Approx(0.25));
    CHECK(report.cases[2].status == TestStatus::Skip);
    CHECK(report.cases[2].marks.empty());
}

TEST_CASE("empty case list is a valid report") {
    TempDir dir;
    write_file(dir / "report.json", R"({"cases":[]})");
    CHECK(parse_test_report(dir / "report.json").cases.empty());
}

TEST_CASE("schema violations carry the offending field path") {
    TempDir dir;
    auto expect_violation = [&](const std::string& body, const std::string& needle) {
        write_file(dir / "r.json", body);
        try {
            parse_test_report(dir / "r.json");
            FAIL_CHECK("expected SchemaViolation for: " << body);
        } catch (const SchemaViolation& e) {
            CHECK(std::string(e.what()).find(needle) != std::string::npos);
        }
    };
    expect_violation(R"({})", "cases");
    expect_violation(R"([1,2])", "top level");
    expect_violation(R"({"cases":[{"status":"pass"}]})", "cases[0].name");
    expect_violation(R"({"cases":[{"name":"t","status":"flaky"}]})", "cases[0].status");
    expect_violation(R"({"cases":[{"name":"t","status":"pass","duration_s":-1}]})",
                     "cases[0].duration_s");
    expect_violation(R"({"cases":[{"name":"t","status":"pass","marks":["FG-A/CK-1"]}]})",
                     "FG-A/CK-1");
    expect_violation(R"({"cases":[{"name":"t","status":"pass"},{"name":"t","status":"fail"}]})",
                     "cases[1].name");
    expect_violation("{ not json", "JSON");
}

TEST_CASE("report parser agrees with an independent validator over mutated documents") {
    // The oracle walks the raw JSON with its own rules; both sides must accept
    // or reject the same documents.
    auto oracle_accepts = [](const std::string& text) -> bool {
        nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("cases") || !j["cases"].is_array())
            return false;
        std::set<std::string> names;
        for (const auto& c : j["cases"]) {
            if (!c.is_object()) return false;
            if (!c.contains("name") || !c["name"].is_string() || c["name"].get<std::string>().empty())
                return false;
            if (!names.insert(c["name"].get<std::string>()).second) return false;
            if (!c.contains("status") || !c["status"].is_string()) return false;
            std::string s = c["status"].get<std::string>();
            if (s != "pass" && s != "fail" && s != "skip") return false;
            if (c.contains("marks")) {
                if (!c["marks"].is_array()) return false;
                for (const auto& m : c["marks"])
                    if (!m.is_string() || !labels::parse_qualified_path(m.get<std::string>()))
                        return false;
            }
            if (c.contains("duration_s") &&
                (!c["duration_s"].is_number() || c["duration_s"].get<double>() < 0))
                return false;
        }
        return true;
    };
    const std::vector<std::string> corpus = {
        R"({"cases":[]})",
        R"({"cases":[{"name":"a","status":"pass"}]})",
        R"({"cases":[{"name":"a","status":"pass","marks":[]}]})",
        R"({"cases":[{"name":"a","status":"skip","duration_s":0}]})",
        R"({"cases":[{"name":"a","status":"pass","marks":["FG-A/FC-B/CK-C"],"duration_s":1.5}]})",
        R"({"cases":[{"name":"","status":"pass"}]})",
        R"({"cases":[{"name":"a","status":"PASS"}]})",
        R"({"cases":[{"name":"a","status":"pass","marks":["fg-a/fc-b/ck-c"]}]})",
        R"({"cases":[{"name":"a","status":"pass","marks":"FG-A/FC-B/CK-C"}]})",
        R"({"cases":[{"name":"a","status":"pass","duration_s":"fast"}]})",
        R"({"cases":[{"name":"a","status":"pass"},{"name":"a","status":"pass"}]})",
        R"({"cases":{}})",
        R"({"cases":[{"name":"a"}]})",
        R"({"cases":[42]})",
        R"(null)",
    };
    TempDir dir;
    for (const auto& text : corpus) {
        write_file(dir / "r.json", text);
        bool accepted;
        try {
            parse_test_report(dir / "r.json");
            accepted = true;
        } catch (const SchemaViolation&) {
            accepted = false;
        }
        CHECK_MESSAGE(accepted == oracle_accepts(text), "disagreement on: " << text);
    }
}

TEST_CASE("bug document collects cited paths") {
    TempDir dir;
    write_file(dir / "bugs.md",
               "Failure traced to FG-ARITHMETIC/FC-VFADD/CK-BF16 under rounding.\n");
    auto bugs = parse_bug_document(dir / "bugs.md");
    REQUIRE(bugs.referenced.size() == 1);
    CHECK(bugs.referenced.begin()->path() == "FG-ARITHMETIC/FC-VFADD/CK-BF16");
}

TEST_CASE("empty bug document references nothing") {
    TempDir dir;
    write_file(dir / "bugs.md", "no failures this run\n");
    CHECK(parse_bug_document(dir / "bugs.md").referenced.empty());
}

TEST_CASE("bug documents accept triples and path strings, deduplicated") {
    std::string text =
        "Inline triple: <FG-ARITHMETIC> <FC-VFADD> <CK-BF16>\n"
        "Same path again as a string: FG-ARITHMETIC/FC-VFADD/CK-BF16\n"
        "A second one: FG-FIFO/FC-ERROR/CK-OVERRUN\n"
        "Not a path: MYFG-X/FC-Y/CK-Z\n";
    TempDir dir;
    write_file(dir / "bugs.md", text);
    auto bugs = parse_bug_document(dir / "bugs.md");
    CHECK(bugs.referenced == bug_paths_two_pass(text));
    CHECK(bugs.referenced.size() == 2);
}

TEST_SUITE_END();
