#include <algorithm>
#include <map>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "veristage/errors.hpp"
#include "veristage/workflow.hpp"

namespace veristage::workflow {

namespace detail {
std::string now_iso8601();
double now_epoch_s();
} // namespace detail

// --- StateLock ---------------------------------------------------------------

Engine::StateLock::StateLock(const std::filesystem::path& state_path) {
    auto lock_path = state_path;
    lock_path += ".lock";
    if (!lock_path.parent_path().empty()) {
        std::error_code ec;
        std::filesystem::create_directories(lock_path.parent_path(), ec);
    }
    fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0)
        throw Error("cannot open state lock: " + lock_path.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw Error("another session holds the state lock: " + lock_path.string());
    }
}

Engine::StateLock::~StateLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

Engine::StateLock::StateLock(StateLock&& other) noexcept : fd_(other.fd_) {
    other.fd_ = -1;
}

Engine::StateLock& Engine::StateLock::operator=(StateLock&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) {
            ::flock(fd_, LOCK_UN);
            ::close(fd_);
        }
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

// --- Engine ------------------------------------------------------------------

Engine::Engine(WorkflowConfig config, std::filesystem::path workspace,
               std::filesystem::path state_path, WorkflowState state, EngineOptions options)
    : config_(std::move(config)),
      workspace_(std::move(workspace)),
      state_path_(std::move(state_path)),
      state_(std::move(state)),
      options_(std::move(options)),
      lock_(options_.lock ? StateLock(state_path_) : StateLock()) {
    rebuild_flat();
}

void Engine::rebuild_flat() {
    flat_ = config_.flattened();
}

Engine Engine::start_new(WorkflowConfig config, std::filesystem::path workspace,
                         std::filesystem::path state_path, std::set<std::string> extra_skip,
                         EngineOptions options) {
    validate_skip(config, extra_skip);
    if (std::filesystem::exists(state_path))
        throw Error("state file already exists: " + state_path.string() +
                    " (resume it or remove it to start over)");

    WorkflowState st;
    st.config_digest = config.digest;
    st.skip = config.skip;
    st.skip.insert(extra_skip.begin(), extra_skip.end());
    st.created_at = st.updated_at = detail::now_iso8601();
    st.active_since_epoch_s = detail::now_epoch_s();
    for (const auto* stage : config.flattened())
        st.stages.push_back({stage->name});

    Engine engine(std::move(config), std::move(workspace), std::move(state_path), std::move(st),
                  std::move(options));
    engine.advance_past_skipped();
    engine.persist();
    return engine;
}

Engine Engine::resume(WorkflowConfig config, std::filesystem::path workspace,
                      std::filesystem::path state_path, EngineOptions options) {
    auto st = restore_state(state_path, config);
    Engine engine(std::move(config), std::move(workspace), std::move(state_path), std::move(st),
                  std::move(options));
    // Offline time does not count toward the active stage.
    engine.state_.active_since_epoch_s = detail::now_epoch_s();
    engine.persist();
    return engine;
}

const VerifyStage* Engine::active_stage() const {
    if (state_.finished)
        return nullptr;
    return flat_[state_.current_index];
}

bool Engine::is_skipped(const std::string& name) const {
    return state_.skip.count(name) != 0;
}

void Engine::advance_past_skipped() {
    while (state_.current_index < flat_.size() &&
           is_skipped(flat_[state_.current_index]->name)) {
        state_.stages[state_.current_index].skipped = true;
        ++state_.current_index;
    }
    if (state_.current_index >= flat_.size())
        state_.finished = true;
    else
        state_.active_since_epoch_s = detail::now_epoch_s();
}

void Engine::fold_elapsed() {
    if (state_.finished)
        return;
    double now = detail::now_epoch_s();
    auto& row = state_.stages[state_.current_index];
    row.elapsed_s += std::max(0.0, now - state_.active_since_epoch_s);
    state_.active_since_epoch_s = now;
}

void Engine::persist() {
    state_.updated_at = detail::now_iso8601();
    persist_state(state_, state_path_);
}

checkers::CheckResult Engine::run_stage_checkers(const VerifyStage& stage) {
    checkers::CheckContext ctx{workspace_, stage.name, options_.interactive, options_.approve};
    checkers::CheckResult aggregate;
    for (const auto& spec : stage.checkers)
        aggregate.merge(checkers::run_checker(spec, ctx));
    return aggregate;
}

checkers::CheckResult Engine::run_check() {
    checkers::CheckResult result;
    if (state_.finished) {
        result.warn("workflow already finished");
        return result;
    }
    result = run_stage_checkers(*flat_[state_.current_index]);
    auto& row = state_.stages[state_.current_index];
    row.attempts += 1;
    if (!result.passed)
        row.failures += 1;
    fold_elapsed();
    persist();
    return result;
}

CompleteOutcome Engine::complete() {
    CompleteOutcome out;
    if (state_.finished) {
        out.already_finished = true;
        out.finished = true;
        out.result.warn("workflow already finished");
        return out;
    }
    const VerifyStage& stage = *flat_[state_.current_index];
    out.stage = stage.name;
    out.result = run_stage_checkers(stage);
    auto& row = state_.stages[state_.current_index];
    row.attempts += 1;
    fold_elapsed();
    if (!out.result.passed) {
        row.failures += 1;
        persist();
        return out;
    }
    row.passed = true;
    ++state_.current_index;
    advance_past_skipped();
    out.advanced = true;
    out.finished = state_.finished;
    if (!state_.finished)
        out.next_stage = flat_[state_.current_index]->name;
    persist();
    return out;
}

StageBrief Engine::current_brief() const {
    if (state_.finished)
        throw Error("workflow already finished; no active stage");
    const VerifyStage& stage = *flat_[state_.current_index];
    const auto& row = state_.stages[state_.current_index];
    StageBrief brief;
    brief.name = stage.name;
    brief.phase = stage.phase;
    brief.description = stage.description;
    brief.tips = stage.tips;
    brief.outputs = stage.outputs;
    for (const auto& c : stage.checkers)
        brief.checkers.push_back(c.describe());
    brief.index = state_.current_index;
    brief.total = flat_.size();
    brief.attempts = row.attempts;
    brief.failures = row.failures;
    return brief;
}

std::string StageBrief::to_text() const {
    std::string out = "stage " + std::to_string(index + 1) + "/" + std::to_string(total) + ": " +
                      name;
    if (!phase.empty())
        out += " [phase: " + phase + "]";
    out += "\n";
    if (!description.empty())
        out += "task: " + description + "\n";
    if (!tips.empty())
        out += "tips: " + tips + "\n";
    if (!outputs.empty()) {
        out += "outputs:";
        for (const auto& o : outputs)
            out += " " + o;
        out += "\n";
    }
    if (!checkers.empty()) {
        out += "gates:";
        for (const auto& c : checkers)
            out += " " + c + ";";
        out += "\n";
    }
    out += "attempts so far: " + std::to_string(attempts) + " (failures: " +
           std::to_string(failures) + ")";
    return out;
}

TelemetryReport telemetry_report(const WorkflowConfig& config, const WorkflowState& state) {
    TelemetryReport report;
    report.current_index = state.current_index;
    report.finished = state.finished;
    auto flat = config.flattened();

    std::vector<std::string> phase_order;
    std::map<std::string, PhaseTotals> phase_map;
    for (std::size_t i = 0; i < flat.size() && i < state.stages.size(); ++i) {
        const auto& s = state.stages[i];
        TelemetryRow row{s.name,     flat[i]->phase, s.attempts, s.failures,
                         s.elapsed_s, s.passed,      s.skipped};
        report.rows.push_back(row);
        report.total_attempts += s.attempts;
        report.total_failures += s.failures;
        report.total_elapsed_s += s.elapsed_s;

        auto [it, inserted] = phase_map.try_emplace(row.phase, PhaseTotals{row.phase});
        if (inserted)
            phase_order.push_back(row.phase);
        it->second.attempts += s.attempts;
        it->second.failures += s.failures;
        it->second.elapsed_s += s.elapsed_s;
        it->second.stage_count += 1;
        if (s.passed)
            it->second.passed_count += 1;
    }
    for (const auto& name : phase_order)
        report.phases.push_back(phase_map[name]);
    return report;
}

} // namespace veristage::workflow
