#include "veristage/artifacts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "veristage/errors.hpp"

namespace veristage::artifacts {

using nlohmann::json;

std::string read_text_file(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        throw FileUnreadable("not a readable file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FileUnreadable("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw FileUnreadable("read error: " + path.string());
    return std::move(ss).str();
}

SpecDocument parse_spec_text(std::string text, const std::string& source_name) {
    SpecDocument doc;
    doc.source = source_name;
    doc.text = std::move(text);

    auto lexed = labels::lex_labels(doc.text);
    auto built = labels::build_tree(lexed.labels);
    doc.tree = std::move(built.tree);

    // Keep one list in document order so checkers can report all findings.
    doc.diagnostics = std::move(lexed.warnings);
    doc.diagnostics.insert(doc.diagnostics.end(), built.diagnostics.begin(),
                           built.diagnostics.end());
    std::stable_sort(doc.diagnostics.begin(), doc.diagnostics.end(),
                     [](const Diagnostic& a, const Diagnostic& b) { return a.offset < b.offset; });
    for (auto& d : doc.diagnostics)
        d.file = source_name;
    return doc;
}

SpecDocument parse_spec_document(const std::filesystem::path& path) {
    auto doc = parse_spec_text(read_text_file(path), path.string());
    doc.source = path;
    return doc;
}

CoverageModel parse_coverage_model(const std::vector<std::filesystem::path>& paths,
                                   const labels::LabelTree& spec_tree) {
    CoverageModel out;
    out.sources = paths;

    // Resolution context flows across files in list order: the token stream is
    // the concatenation of all sources.
    std::string cur_fg, cur_fc;
    for (const auto& file : paths) {
        std::string text = read_text_file(file);
        auto lexed = labels::lex_labels(text);
        for (auto& w : lexed.warnings) {
            w.file = file.string();
            out.warnings.push_back(std::move(w));
        }
        for (const auto& item : lexed.labels) {
            const auto& name = item.label.name;
            switch (item.label.level) {
            case labels::LabelLevel::FG:
                cur_fg = name;
                cur_fc.clear();
                break;
            case labels::LabelLevel::FC:
                if (cur_fg.empty()) {
                    std::string msg = "unresolved label <FC-" + name +
                                      ">: no preceding function group";
                    if (auto parent = spec_tree.parent_of_checkpoint(name))
                        msg += " (specification defines it under FG-" + *parent + ")";
                    out.unresolved.push_back(
                        {DiagKind::UnresolvedLabel, msg, file.string(), item.offset});
                    break;
                }
                cur_fc = name;
                break;
            case labels::LabelLevel::CK:
                if (cur_fg.empty() || cur_fc.empty()) {
                    out.unresolved.push_back({DiagKind::UnresolvedLabel,
                                              "unresolved label <CK-" + name +
                                                  ">: no preceding function checkpoint",
                                              file.string(), item.offset});
                    break;
                }
                out.paths.insert({cur_fg, cur_fc, name});
                break;
            }
        }
    }
    return out;
}

const char* to_string(TestStatus status) {
    switch (status) {
    case TestStatus::Pass: return "pass";
    case TestStatus::Fail: return "fail";
    case TestStatus::Skip: return "skip";
    }
    return "??";
}

namespace {

[[noreturn]] void violate(const std::string& where, const std::string& why) {
    throw SchemaViolation("test report schema violation at " + where + ": " + why);
}

} // namespace

TestReport parse_test_report_text(const std::string& json_text, const std::string& source_name) {
    json doc = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw SchemaViolation("test report is not valid JSON: " + source_name);
    if (!doc.is_object())
        violate("top level", "expected an object");
    if (!doc.contains("cases"))
        violate("top level", "required field \"cases\" missing");
    const json& cases = doc["cases"];
    if (!cases.is_array())
        violate("cases", "expected an array");

    TestReport report;
    std::set<std::string> seen_names;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const json& c = cases[i];
        std::string where = "cases[" + std::to_string(i) + "]";
        if (!c.is_object())
            violate(where, "expected an object");

        TestCase tc;
        if (!c.contains("name") || !c["name"].is_string())
            violate(where + ".name", "required string missing");
        tc.name = c["name"].get<std::string>();
        if (tc.name.empty())
            violate(where + ".name", "must be non-empty");
        if (!seen_names.insert(tc.name).second)
            violate(where + ".name", "duplicate testcase name \"" + tc.name + "\"");

        if (!c.contains("status") || !c["status"].is_string())
            violate(where + ".status", "required string missing");
        std::string status = c["status"].get<std::string>();
        if (status == "pass")
            tc.status = TestStatus::Pass;
        else if (status == "fail")
            tc.status = TestStatus::Fail;
        else if (status == "skip")
            tc.status = TestStatus::Skip;
        else
            violate(where + ".status", "expected pass|fail|skip, got \"" + status + "\"");

        if (c.contains("marks")) {
            if (!c["marks"].is_array())
                violate(where + ".marks", "expected an array of path strings");
            for (std::size_t m = 0; m < c["marks"].size(); ++m) {
                const json& mark = c["marks"][m];
                std::string mwhere = where + ".marks[" + std::to_string(m) + "]";
                if (!mark.is_string())
                    violate(mwhere, "expected a string");
                std::string value = mark.get<std::string>();
                if (!labels::parse_qualified_path(value))
                    violate(mwhere, "not a qualified FG-*/FC-*/CK-* path: \"" + value + "\"");
                tc.marks.insert(value);
            }
        }

        if (c.contains("duration_s")) {
            if (!c["duration_s"].is_number())
                violate(where + ".duration_s", "expected a number");
            tc.duration_s = c["duration_s"].get<double>();
            if (tc.duration_s < 0)
                violate(where + ".duration_s", "must be >= 0");
        }

        report.cases.push_back(std::move(tc));
    }
    return report;
}

TestReport parse_test_report(const std::filesystem::path& path) {
    return parse_test_report_text(read_text_file(path), path.string());
}

namespace {

bool is_path_char(char c) {
    return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
}

// Scans free text for bare `FG-x/FC-y/CK-z` strings. A candidate must start
// at a non-name-char boundary so identifiers like MYFG-… don't match.
void scan_path_strings(const std::string& text, labels::PathSet& out) {
    std::size_t pos = 0;
    while ((pos = text.find("FG-", pos)) != std::string::npos) {
        if (pos > 0 && is_path_char(text[pos - 1])) {
            pos += 3;
            continue;
        }
        std::size_t end = pos;
        while (end < text.size() && (is_path_char(text[end]) || text[end] == '/'))
            ++end;
        std::string_view candidate(text.data() + pos, end - pos);
        // Trim to the first three segments; free text may continue with '/'.
        std::size_t cut = 0;
        int slashes = 0;
        for (; cut < candidate.size(); ++cut) {
            if (candidate[cut] == '/' && ++slashes == 3)
                break;
        }
        candidate = candidate.substr(0, cut);
        if (auto qc = labels::parse_qualified_path(candidate)) {
            out.insert(*qc);
            pos += candidate.size();
        } else {
            pos += 3;
        }
    }
}

} // namespace

BugDocument parse_bug_text(const std::string& text, const std::filesystem::path& source) {
    BugDocument out;
    out.source = source;

    scan_path_strings(text, out.referenced);

    // Inline label triples under the nearest-preceding rule.
    std::string fg, fc;
    for (const auto& item : labels::lex_labels(text).labels) {
        switch (item.label.level) {
        case labels::LabelLevel::FG: fg = item.label.name; fc.clear(); break;
        case labels::LabelLevel::FC:
            if (!fg.empty())
                fc = item.label.name;
            break;
        case labels::LabelLevel::CK:
            if (!fg.empty() && !fc.empty())
                out.referenced.insert({fg, fc, item.label.name});
            break;
        }
    }
    return out;
}

BugDocument parse_bug_document(const std::filesystem::path& path) {
    return parse_bug_text(read_text_file(path), path);
}

} // namespace veristage::artifacts
