#include "veristage/reporting.hpp"

#include <cstdio>

#include <json.hpp>

#include "veristage/artifacts.hpp"
#include "veristage/errors.hpp"

namespace veristage::report {

using nlohmann::json;

ClosureSummary compute_closure_summary(const workflow::WorkflowConfig& config,
                                       const std::filesystem::path& workspace) {
    ClosureSummary out;

    // Use the last declared instance of each VCLM checker as the source of
    // truth for which artifacts form the closure.
    const checkers::CoverageConsistencyParams* cov_params = nullptr;
    const checkers::TestReportClosureParams* closure_params = nullptr;
    for (const auto* stage : config.flattened())
        for (const auto& spec : stage->checkers) {
            if (const auto* p = std::get_if<checkers::CoverageConsistencyParams>(&spec.params))
                cov_params = p;
            if (const auto* p = std::get_if<checkers::TestReportClosureParams>(&spec.params))
                closure_params = p;
        }

    std::string spec_document;
    if (closure_params)
        spec_document = closure_params->spec_document;
    else if (cov_params)
        spec_document = cov_params->spec_document;
    if (spec_document.empty()) {
        out.notes.push_back("config declares no consistency checkers");
        return out;
    }
    out.spec_document = spec_document;

    artifacts::SpecDocument spec;
    try {
        spec = artifacts::parse_spec_document(workspace / spec_document);
    } catch (const FileUnreadable&) {
        out.notes.push_back("specification analysis document not found: " + spec_document);
        return out;
    }
    auto spec_paths = labels::flatten(spec.tree);
    out.has_spec = true;
    out.total_paths = spec_paths.size();

    if (cov_params) {
        std::vector<std::filesystem::path> files;
        bool all_present = true;
        for (const auto& f : cov_params->coverage_files) {
            if (!std::filesystem::is_regular_file(workspace / f)) {
                out.notes.push_back("coverage source not found: " + f);
                all_present = false;
            } else {
                files.push_back(workspace / f);
            }
        }
        if (all_present) {
            auto cov = artifacts::parse_coverage_model(files, spec.tree);
            auto diff = labels::diff_bidirectional(spec_paths, cov.paths);
            out.has_coverage = true;
            for (const auto& p : diff.missing)
                out.missing_paths.push_back(p.path());
            for (const auto& p : diff.extra)
                out.extra_paths.push_back(p.path());
        }
    }

    if (closure_params) {
        try {
            auto rep = artifacts::parse_test_report(workspace / closure_params->report);
            auto bugs = artifacts::parse_bug_document(workspace / closure_params->bug_document);
            out.has_report = true;
            std::set<std::string> exercised;
            for (const auto& tc : rep.cases)
                if (tc.status != artifacts::TestStatus::Skip)
                    exercised.insert(tc.marks.begin(), tc.marks.end());
            std::set<std::string> bug_paths;
            for (const auto& p : bugs.referenced)
                bug_paths.insert(p.path());
            for (const auto& p : spec_paths) {
                if (exercised.count(p.path()))
                    ++out.exercised;
                else
                    out.unexercised_paths.push_back(p.path());
            }
            std::set<std::string> untraced;
            for (const auto& tc : rep.cases)
                if (tc.status == artifacts::TestStatus::Fail)
                    for (const auto& m : tc.marks)
                        if (!bug_paths.count(m))
                            untraced.insert(m);
            out.untraced_paths.assign(untraced.begin(), untraced.end());
        } catch (const Error& e) {
            out.notes.push_back(std::string("report closure unavailable: ") + e.what());
        }
    }
    return out;
}

namespace {

std::string format_row(const std::string& name, const std::string& phase, std::uint64_t attempts,
                       std::uint64_t failures, double elapsed, const std::string& status) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-34s %-10s %8llu %9llu %10.2f  %s\n", name.c_str(),
                  phase.substr(0, 10).c_str(), static_cast<unsigned long long>(attempts),
                  static_cast<unsigned long long>(failures), elapsed, status.c_str());
    return buf;
}

} // namespace

std::string render_table(const workflow::TelemetryReport& telemetry,
                         const ClosureSummary& closure) {
    std::string out;
    out += "stage telemetry\n";
    out += "  stage                              phase       attempts  failures   elapsed_s  status\n";
    for (const auto& row : telemetry.rows) {
        std::string status = row.skipped ? "skipped" : row.passed ? "passed" : "pending";
        out += format_row(row.name, row.phase, row.attempts, row.failures, row.elapsed_s, status);
    }
    out += "\nper-phase totals\n";
    for (const auto& p : telemetry.phases) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "  %-44s %8llu %9llu %10.2f  (%zu/%zu stages passed)\n",
                      p.phase.c_str(), static_cast<unsigned long long>(p.attempts),
                      static_cast<unsigned long long>(p.failures), p.elapsed_s, p.passed_count,
                      p.stage_count);
        out += buf;
    }
    {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "\ntotals: attempts %llu, failures %llu, elapsed %.2f s, %s\n",
                      static_cast<unsigned long long>(telemetry.total_attempts),
                      static_cast<unsigned long long>(telemetry.total_failures),
                      telemetry.total_elapsed_s,
                      telemetry.finished ? "finished" : "in progress");
        out += buf;
    }

    out += "\nlabel consistency\n";
    if (!closure.has_spec) {
        out += "  (unavailable)\n";
    } else {
        out += "  specification: " + closure.spec_document + " (" +
               std::to_string(closure.total_paths) + " check points)\n";
        if (closure.has_coverage) {
            out += "  coverage omissions: " + std::to_string(closure.missing_paths.size()) +
                   ", hallucinations: " + std::to_string(closure.extra_paths.size()) + "\n";
            for (const auto& p : closure.missing_paths)
                out += "    omission: " + p + "\n";
            for (const auto& p : closure.extra_paths)
                out += "    extra: " + p + "\n";
        }
        if (closure.has_report) {
            out += "  exercised: " + std::to_string(closure.exercised) + "/" +
                   std::to_string(closure.total_paths) +
                   ", untraced failures: " + std::to_string(closure.untraced_paths.size()) + "\n";
            for (const auto& p : closure.unexercised_paths)
                out += "    unexercised: " + p + "\n";
            for (const auto& p : closure.untraced_paths)
                out += "    untraced failure: " + p + "\n";
        }
    }
    for (const auto& n : closure.notes)
        out += "  note: " + n + "\n";
    return out;
}

std::string render_json(const workflow::TelemetryReport& telemetry,
                        const ClosureSummary& closure) {
    json rows = json::array();
    for (const auto& r : telemetry.rows)
        rows.push_back({{"name", r.name},
                        {"phase", r.phase},
                        {"attempts", r.attempts},
                        {"failures", r.failures},
                        {"elapsed_s", r.elapsed_s},
                        {"passed", r.passed},
                        {"skipped", r.skipped}});
    json phases = json::array();
    for (const auto& p : telemetry.phases)
        phases.push_back({{"phase", p.phase},
                          {"attempts", p.attempts},
                          {"failures", p.failures},
                          {"elapsed_s", p.elapsed_s},
                          {"stage_count", p.stage_count},
                          {"passed_count", p.passed_count}});
    json consistency = {{"available", closure.has_spec}};
    if (closure.has_spec) {
        consistency["spec_document"] = closure.spec_document;
        consistency["total_paths"] = closure.total_paths;
        if (closure.has_coverage) {
            consistency["missing"] = closure.missing_paths;
            consistency["extra"] = closure.extra_paths;
        }
        if (closure.has_report) {
            consistency["exercised"] = closure.exercised;
            consistency["unexercised"] = closure.unexercised_paths;
            consistency["untraced_failures"] = closure.untraced_paths;
        }
    }
    consistency["notes"] = closure.notes;

    json j = {{"telemetry",
               {{"rows", std::move(rows)},
                {"phases", std::move(phases)},
                {"total_attempts", telemetry.total_attempts},
                {"total_failures", telemetry.total_failures},
                {"total_elapsed_s", telemetry.total_elapsed_s},
                {"current_index", telemetry.current_index},
                {"finished", telemetry.finished}}},
              {"consistency", std::move(consistency)}};
    return j.dump(2) + "\n";
}

} // namespace veristage::report
