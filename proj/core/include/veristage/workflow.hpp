#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "veristage/checkers.hpp"

namespace veristage::workflow {

// The workflow is an ordered list of gated stages loaded from a YAML config.
// Progression is strict: a stage is passed only when every one of its
// checkers passes during a Complete, and the engine persists state after
// every mutation so an interrupted run resumes from the last transition.

struct VerifyStage {
    std::string name;
    std::string description; // task text shown to the agent
    std::string tips;        // guidance text
    std::string phase;       // free-form grouping used by telemetry reports
    std::vector<std::string> outputs; // workspace-relative deliverables
    std::vector<checkers::CheckerSpec> checkers;
    bool skippable = false;
    std::vector<VerifyStage> substages; // executed before this stage's own gate
};

struct WorkflowConfig {
    std::string version;
    std::vector<VerifyStage> stages;
    std::set<std::string> skip;                 // file-level skip overlay
    std::vector<std::string> allowed_commands;  // RunTest allowlist (argv[0] match)
    double command_timeout_s = 300.0;
    std::string digest; // content hash of the canonicalized config
    std::filesystem::path source;

    /// Depth-first order with substages before their parent's own gate.
    std::vector<const VerifyStage*> flattened() const;
    const VerifyStage* find(const std::string& name) const;
};

/// Loads and fully validates a workflow config. Unknown keys, duplicate stage
/// names, unknown checker kinds, malformed params and skip entries naming
/// non-skippable stages all raise ConfigInvalid with a field path.
WorkflowConfig load_config(const std::filesystem::path& path);
WorkflowConfig load_config_text(const std::string& yaml_text, const std::string& source_name);

/// Validates a run-time skip overlay against the config (ConfigInvalid).
void validate_skip(const WorkflowConfig& config, const std::set<std::string>& skip);

struct StageState {
    std::string name;
    std::uint64_t attempts = 0; // Check and Complete invocations both count
    std::uint64_t failures = 0;
    double elapsed_s = 0.0; // wall-clock while active, folded at each persist
    bool passed = false;
    bool skipped = false;

    bool operator==(const StageState&) const = default;
};

struct WorkflowState {
    std::string config_digest;
    std::size_t current_index = 0; // into the flattened order; only increases
    bool finished = false;
    std::set<std::string> skip; // effective overlay captured at creation
    std::string created_at;     // ISO-8601 UTC
    std::string updated_at;
    double active_since_epoch_s = 0.0;
    std::vector<StageState> stages; // flattened order
};

/// Atomic write-then-rename persistence.
void persist_state(const WorkflowState& state, const std::filesystem::path& path);

/// Restores and validates internal invariants (StateCorrupt on violation).
WorkflowState restore_state(const std::filesystem::path& path);

/// Additionally validates the state against the config (DigestMismatch when
/// the config changed since the state was written).
WorkflowState restore_state(const std::filesystem::path& path, const WorkflowConfig& config);

struct EngineOptions {
    bool interactive = false;
    std::function<bool(const std::string&)> approve; // manual-gate hook
    bool lock = true; // advisory lock on the state path; one writer per state
};

/// Structured stage context for GetCurrentTips / the CLI.
struct StageBrief {
    std::string name;
    std::string phase;
    std::string description;
    std::string tips;
    std::vector<std::string> outputs;
    std::vector<std::string> checkers; // describe() of each gate, in order
    std::size_t index = 0;             // 0-based position in the flattened order
    std::size_t total = 0;
    std::uint64_t attempts = 0;
    std::uint64_t failures = 0;

    std::string to_text() const;
};

struct CompleteOutcome {
    bool advanced = false;
    bool finished = false;         // workflow terminal after this call
    bool already_finished = false; // Complete called on a finished workflow
    std::string stage;             // stage the checkers ran against
    std::string next_stage;        // active stage after advancing, if any
    checkers::CheckResult result;
};

class Engine {
public:
    /// Creates a fresh state file (refuses to overwrite an existing one),
    /// applying `extra_skip` on top of the config's skip set.
    static Engine start_new(WorkflowConfig config, std::filesystem::path workspace,
                            std::filesystem::path state_path,
                            std::set<std::string> extra_skip = {}, EngineOptions options = {});

    /// Restores a persisted state; DigestMismatch when the config changed.
    static Engine resume(WorkflowConfig config, std::filesystem::path workspace,
                         std::filesystem::path state_path, EngineOptions options = {});

    Engine(Engine&&) noexcept = default;
    Engine& operator=(Engine&&) noexcept = default;

    const WorkflowConfig& config() const { return config_; }
    const WorkflowState& state() const { return state_; }
    const std::filesystem::path& workspace() const { return workspace_; }
    const std::filesystem::path& state_path() const { return state_path_; }

    bool finished() const { return state_.finished; }
    /// Active stage, or nullptr when the workflow is finished.
    const VerifyStage* active_stage() const;
    StageBrief current_brief() const;

    /// Runs every checker of the active stage in declaration order and
    /// aggregates all messages. Counts an attempt (and a failure when the
    /// aggregate fails) but never advances.
    checkers::CheckResult run_check();

    /// Re-runs all checkers; on aggregate pass marks the stage passed and
    /// advances past any skipped stages, persisting atomically.
    CompleteOutcome complete();

private:
    class StateLock {
    public:
        StateLock() = default;
        explicit StateLock(const std::filesystem::path& state_path);
        ~StateLock();
        StateLock(StateLock&& other) noexcept;
        StateLock& operator=(StateLock&& other) noexcept;

    private:
        int fd_ = -1;
    };

    Engine(WorkflowConfig config, std::filesystem::path workspace,
           std::filesystem::path state_path, WorkflowState state, EngineOptions options);

    void rebuild_flat();
    bool is_skipped(const std::string& name) const;
    void advance_past_skipped();
    void fold_elapsed();
    void persist();
    checkers::CheckResult run_stage_checkers(const VerifyStage& stage);

    WorkflowConfig config_;
    std::filesystem::path workspace_;
    std::filesystem::path state_path_;
    WorkflowState state_;
    EngineOptions options_;
    StateLock lock_;
    std::vector<const VerifyStage*> flat_;
};

struct TelemetryRow {
    std::string name;
    std::string phase;
    std::uint64_t attempts = 0;
    std::uint64_t failures = 0;
    double elapsed_s = 0.0;
    bool passed = false;
    bool skipped = false;
};

struct PhaseTotals {
    std::string phase;
    std::uint64_t attempts = 0;
    std::uint64_t failures = 0;
    double elapsed_s = 0.0;
    std::size_t stage_count = 0;
    std::size_t passed_count = 0;
};

struct TelemetryReport {
    std::vector<TelemetryRow> rows;    // flattened stage order
    std::vector<PhaseTotals> phases;   // order of first appearance
    std::uint64_t total_attempts = 0;
    std::uint64_t total_failures = 0;
    double total_elapsed_s = 0.0;
    std::size_t current_index = 0;
    bool finished = false;
};

TelemetryReport telemetry_report(const WorkflowConfig& config, const WorkflowState& state);

} // namespace veristage::workflow
