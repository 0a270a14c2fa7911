#pragma once

#include <filesystem>
#include <string>

#include "veristage/gateway.hpp"

namespace veristage::scaffold {

// `init` fixture: the default workflow config, a pure-software DUT
// (an 8-bit ALU as a shell library), a report-emitting test runner, an
// annotated design brief, a coverage stub, and a golden scripted trace that
// drives the whole default workflow to its terminal state.

std::string default_workflow_yaml();
std::string design_brief_text();
std::string dut_module_text();
std::string test_runner_text();
std::string coverage_stub_text();

/// Content of docs/spec_analysis.md as the golden trace writes it.
std::string annotated_spec_text();

/// The golden trace: every stage of the default workflow, including two
/// deliberate failing checks (one premature Check, one renamed coverage
/// label that is then repaired).
gateway::ScriptedTrace golden_trace();

/// All scaffold file contents are fixed, so repeated --force runs of init are
/// byte-identical. Throws TargetNotEmpty when `dir` has entries and `force`
/// is unset.
void init_workspace(const std::filesystem::path& dir, bool force);

} // namespace veristage::scaffold
