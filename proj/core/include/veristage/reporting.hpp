#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "veristage/workflow.hpp"

namespace veristage::report {

/// Label-closure summary recomputed from the workspace artifacts named by the
/// config's last coverage_consistency and test_report_closure checkers.
/// A pure function of the config and the files on disk.
struct ClosureSummary {
    bool has_spec = false;
    std::string spec_document;
    std::size_t total_paths = 0;

    bool has_coverage = false;
    std::vector<std::string> missing_paths; // omissions
    std::vector<std::string> extra_paths;   // hallucinations

    bool has_report = false;
    std::size_t exercised = 0;
    std::vector<std::string> unexercised_paths;
    std::vector<std::string> untraced_paths; // failing marks absent from bugs

    std::vector<std::string> notes; // e.g. inputs that were missing
};

ClosureSummary compute_closure_summary(const workflow::WorkflowConfig& config,
                                       const std::filesystem::path& workspace);

std::string render_table(const workflow::TelemetryReport& telemetry,
                         const ClosureSummary& closure);

/// Structured form: {"telemetry": {...}, "consistency": {...}}.
std::string render_json(const workflow::TelemetryReport& telemetry,
                        const ClosureSummary& closure);

} // namespace veristage::report
