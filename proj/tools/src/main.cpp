// veristage CLI: scaffolding, agent-driven runs, one-shot checks, status and
// telemetry/consistency reports over a checker-gated verification workflow.
//
// Exit codes: 0 pass/finished, 1 check failed or run not finished,
//             2 configuration error, 3 environment error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "veristage/errors.hpp"
#include "veristage/gateway.hpp"
#include "veristage/reporting.hpp"
#include "veristage/scaffold.hpp"
#include "veristage/workflow.hpp"

namespace {

namespace fs = std::filesystem;
using namespace veristage;

constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitEnvError = 3;

struct CommonPaths {
    std::string workspace = ".";
    std::string config;
    std::string state;

    fs::path workspace_path() const { return fs::path(workspace); }
    fs::path config_path() const {
        return config.empty() ? workspace_path() / "workflow.yaml" : fs::path(config);
    }
    fs::path state_path() const {
        return state.empty() ? workspace_path() / ".veristage" / "state.json" : fs::path(state);
    }

    void attach(CLI::App* cmd) {
        cmd->add_option("--workspace", workspace, "workspace directory (default: .)");
        cmd->add_option("--config", config, "workflow config (default: <workspace>/workflow.yaml)");
        cmd->add_option("--state", state,
                        "state file (default: <workspace>/.veristage/state.json)");
    }
};

bool terminal_approve(const std::string& prompt) {
    std::fprintf(stderr, "%s [y/N]: ", prompt.c_str());
    std::string line;
    if (!std::getline(std::cin, line))
        return false;
    return line == "y" || line == "Y" || line == "yes" || line == "approved";
}

workflow::EngineOptions engine_options(bool non_interactive) {
    workflow::EngineOptions opts;
    opts.interactive = !non_interactive;
    opts.approve = terminal_approve;
    return opts;
}

void print_messages(const checkers::CheckResult& result) {
    for (const auto& m : result.messages) {
        const char* tag = m.severity == checkers::Severity::Error ? "error" : "warning";
        if (m.locus)
            std::printf("[%s] %s (%s:%zu)\n", tag, m.text.c_str(), m.locus->path.c_str(),
                        m.locus->offset);
        else
            std::printf("[%s] %s\n", tag, m.text.c_str());
    }
}

struct AgentSelector {
    enum class Kind { Scripted, Endpoint, None } kind = Kind::None;
    std::string trace_path;
};

AgentSelector parse_agent(const std::string& value) {
    AgentSelector out;
    if (value.rfind("scripted:", 0) == 0) {
        out.kind = AgentSelector::Kind::Scripted;
        out.trace_path = value.substr(9);
        if (out.trace_path.empty())
            throw ConfigInvalid("--agent scripted: needs a trace path");
    } else if (value == "endpoint") {
        out.kind = AgentSelector::Kind::Endpoint;
    } else if (value == "none") {
        out.kind = AgentSelector::Kind::None;
    } else {
        throw ConfigInvalid("--agent must be scripted:<trace>, endpoint, or none");
    }
    return out;
}

int drive(workflow::Engine& engine, const AgentSelector& agent, std::size_t budget,
          const fs::path& trace_out) {
    gateway::Session session(engine);
    switch (agent.kind) {
    case AgentSelector::Kind::Scripted: {
        auto trace = gateway::load_trace(agent.trace_path);
        try {
            auto result = gateway::replay(trace, session);
            std::printf("replayed %zu steps, %zu failed check(s)\n", result.responses.size(),
                        result.failed_checks);
        } catch (const AssertionMismatch& e) {
            std::fprintf(stderr, "trace assertion failed: %s\n", e.what());
            return kExitCheckFailed;
        }
        break;
    }
    case AgentSelector::Kind::Endpoint: {
        auto endpoint = gateway::LlmEndpoint::from_env();
        if (endpoint.base_url.empty() || endpoint.model.empty())
            throw ConfigInvalid(
                "endpoint agent needs VERISTAGE_API_BASE and VERISTAGE_MODEL set");
        endpoint.step_budget = budget;
        endpoint.trace_log = trace_out;
        auto result = gateway::llm_driver(endpoint, session);
        std::printf("driver: %s after %zu exchange(s)%s%s\n", to_string(result.status),
                    result.steps, result.message.empty() ? "" : " -- ", result.message.c_str());
        if (result.status == gateway::DriverStatus::EndpointUnreachable)
            return kExitEnvError;
        break;
    }
    case AgentSelector::Kind::None: {
        if (!engine.finished())
            std::printf("%s\n", engine.current_brief().to_text().c_str());
        std::printf(
            "no agent selected; drive the workflow via `veristage serve` or `veristage check`\n");
        return kExitPass;
    }
    }
    if (engine.finished()) {
        std::printf("workflow finished\n");
        return kExitPass;
    }
    std::printf("workflow not finished: at stage %s\n",
                engine.active_stage() ? engine.active_stage()->name.c_str() : "?");
    return kExitCheckFailed;
}

int cmd_run(const CommonPaths& paths, const std::string& agent_str,
            const std::vector<std::string>& skip, std::size_t budget, bool non_interactive,
            bool resume_existing) {
    auto agent = parse_agent(agent_str);
    auto config = workflow::load_config(paths.config_path());
    auto trace_out = paths.state_path().parent_path() / "driver_trace.json";

    workflow::Engine engine =
        resume_existing
            ? workflow::Engine::resume(config, paths.workspace_path(), paths.state_path(),
                                       engine_options(non_interactive))
            : workflow::Engine::start_new(config, paths.workspace_path(), paths.state_path(),
                                          std::set<std::string>(skip.begin(), skip.end()),
                                          engine_options(non_interactive));
    return drive(engine, agent, budget, trace_out);
}

int cmd_check(const CommonPaths& paths, const std::optional<std::string>& stage_name,
              bool non_interactive) {
    auto config = workflow::load_config(paths.config_path());
    checkers::CheckResult result;
    std::string stage_label;

    if (stage_name) {
        const auto* stage = config.find(*stage_name);
        if (!stage)
            throw ConfigInvalid("unknown stage: " + *stage_name);
        checkers::CheckContext ctx{paths.workspace_path(), stage->name, !non_interactive,
                                   terminal_approve};
        for (const auto& spec : stage->checkers)
            result.merge(checkers::run_checker(spec, ctx));
        stage_label = stage->name;
    } else if (fs::exists(paths.state_path())) {
        auto engine = workflow::Engine::resume(config, paths.workspace_path(), paths.state_path(),
                                               engine_options(non_interactive));
        if (engine.finished()) {
            std::printf("workflow finished; nothing to check\n");
            return kExitPass;
        }
        stage_label = engine.active_stage()->name;
        result = engine.run_check();
    } else {
        // One-shot mode before any run: lint the first non-skipped stage.
        auto flat = config.flattened();
        std::size_t i = 0;
        while (i < flat.size() && config.skip.count(flat[i]->name))
            ++i;
        if (i == flat.size()) {
            std::printf("config has no runnable stages\n");
            return kExitPass;
        }
        checkers::CheckContext ctx{paths.workspace_path(), flat[i]->name, !non_interactive,
                                   terminal_approve};
        for (const auto& spec : flat[i]->checkers)
            result.merge(checkers::run_checker(spec, ctx));
        stage_label = flat[i]->name;
    }

    print_messages(result);
    if (result.passed) {
        std::printf("check passed: stage %s\n", stage_label.c_str());
        return kExitPass;
    }
    std::printf("check failed: %zu error(s) at stage %s\n", result.error_count(),
                stage_label.c_str());
    return kExitCheckFailed;
}

int cmd_status(const CommonPaths& paths) {
    auto config = workflow::load_config(paths.config_path());
    auto state = workflow::restore_state(paths.state_path(), config);
    auto report = workflow::telemetry_report(config, state);

    std::size_t passed = 0, skipped = 0;
    for (const auto& row : report.rows) {
        passed += row.passed ? 1 : 0;
        skipped += row.skipped ? 1 : 0;
    }
    std::printf("workflow: %zu/%zu stages passed, %zu skipped, %s\n", passed, report.rows.size(),
                skipped, report.finished ? "finished" : "in progress");
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        const char* status = row.skipped ? "skipped" : row.passed ? "passed" : "pending";
        const char* marker = (!report.finished && i == report.current_index) ? ">" : " ";
        std::printf("%s %3zu  %-36s %-8s attempts=%llu failures=%llu\n", marker, i + 1,
                    row.name.c_str(), status, static_cast<unsigned long long>(row.attempts),
                    static_cast<unsigned long long>(row.failures));
    }
    if (!report.finished)
        std::printf("current stage: %s (%zu of %zu)\n",
                    report.rows[report.current_index].name.c_str(), report.current_index + 1,
                    report.rows.size());
    return kExitPass;
}

int cmd_report(const CommonPaths& paths, const std::string& format) {
    auto config = workflow::load_config(paths.config_path());
    auto state = workflow::restore_state(paths.state_path(), config);
    auto telemetry = workflow::telemetry_report(config, state);
    auto closure = report::compute_closure_summary(config, paths.workspace_path());
    if (format == "json")
        std::fputs(report::render_json(telemetry, closure).c_str(), stdout);
    else
        std::fputs(report::render_table(telemetry, closure).c_str(), stdout);
    return kExitPass;
}

int cmd_serve(const CommonPaths& paths, bool non_interactive) {
    auto config = workflow::load_config(paths.config_path());
    auto engine = fs::exists(paths.state_path())
                      ? workflow::Engine::resume(config, paths.workspace_path(),
                                                 paths.state_path(),
                                                 engine_options(non_interactive))
                      : workflow::Engine::start_new(config, paths.workspace_path(),
                                                    paths.state_path(), {},
                                                    engine_options(non_interactive));
    gateway::Session session(engine);
    std::fprintf(stderr, "veristage serve: one JSON request per line on stdin; tools:");
    for (const auto& tool : gateway::registered_tools())
        std::fprintf(stderr, " %s", tool.c_str());
    std::fprintf(stderr, "\n");
    gateway::serve_stdio(session, std::cin, std::cout);
    return kExitPass;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"veristage: checker-gated verification workflow orchestration and "
                 "label-consistency linting"};
    app.require_subcommand(1);

    std::function<int()> action;

    // init
    auto* init = app.add_subcommand(
        "init", "scaffold a workspace with the default workflow and a runnable fixture");
    std::string init_dir;
    bool init_force = false;
    init->add_option("dir", init_dir, "target directory")->required();
    init->add_flag("--force", init_force, "scaffold even into a non-empty directory");
    init->callback([&] {
        action = [&]() {
            scaffold::init_workspace(init_dir, init_force);
            std::printf("workspace scaffolded at %s\n", init_dir.c_str());
            std::printf("next: cd %s && veristage run --agent scripted:traces/golden.json "
                        "--non-interactive\n",
                        init_dir.c_str());
            return kExitPass;
        };
    });

    // run / resume
    CommonPaths run_paths, resume_paths, check_paths, status_paths, report_paths, serve_paths;
    std::string run_agent, resume_agent = "none";
    std::vector<std::string> run_skip;
    std::size_t run_budget = 500, resume_budget = 500;
    bool run_noninteractive = false, resume_noninteractive = false;

    auto* run = app.add_subcommand("run", "start a fresh run driven by the selected agent");
    run_paths.attach(run);
    run->add_option("--agent", run_agent, "scripted:<trace>, endpoint, or none")->required();
    run->add_option("--skip", run_skip, "additional skippable stages to skip");
    run->add_option("--budget", run_budget, "step budget for the endpoint agent (default 500)");
    run->add_flag("--non-interactive", run_noninteractive,
                  "never prompt; manual gates use token files");
    run->callback([&] {
        action = [&]() {
            return cmd_run(run_paths, run_agent, run_skip, run_budget, run_noninteractive, false);
        };
    });

    auto* resume = app.add_subcommand("resume", "continue from the persisted state");
    resume_paths.attach(resume);
    resume->add_option("--agent", resume_agent, "scripted:<trace>, endpoint, or none");
    resume->add_option("--budget", resume_budget, "step budget for the endpoint agent");
    resume->add_flag("--non-interactive", resume_noninteractive,
                     "never prompt; manual gates use token files");
    resume->callback([&] {
        action = [&]() {
            return cmd_run(resume_paths, resume_agent, {}, resume_budget, resume_noninteractive,
                           true);
        };
    });

    // check
    auto* check = app.add_subcommand("check", "run the active (or named) stage's checkers once");
    check_paths.attach(check);
    std::string check_stage;
    bool check_noninteractive = false;
    check->add_option("stage", check_stage, "stage name (default: active stage)");
    check->add_flag("--non-interactive", check_noninteractive,
                    "never prompt; manual gates use token files");
    check->callback([&] {
        action = [&]() {
            return cmd_check(check_paths,
                             check_stage.empty() ? std::nullopt
                                                 : std::optional<std::string>(check_stage),
                             check_noninteractive);
        };
    });

    // status
    auto* status = app.add_subcommand("status", "print stage progress and counters");
    status_paths.attach(status);
    status->callback([&] {
        action = [&]() { return cmd_status(status_paths); };
    });

    // report
    auto* rep = app.add_subcommand("report", "emit the telemetry and consistency report");
    report_paths.attach(rep);
    std::string report_format = "table";
    rep->add_option("--format", report_format, "table or json")
        ->check(CLI::IsMember({"table", "json"}));
    rep->callback([&] {
        action = [&]() { return cmd_report(report_paths, report_format); };
    });

    // serve
    auto* serve = app.add_subcommand("serve", "serve the tool-call protocol over stdio");
    serve_paths.attach(serve);
    bool serve_noninteractive = false;
    serve->add_flag("--non-interactive", serve_noninteractive,
                    "never prompt; manual gates use token files");
    serve->callback([&] {
        action = [&]() { return cmd_serve(serve_paths, serve_noninteractive); };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfigError;
    }

    try {
        return action();
    } catch (const ConfigInvalid& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfigError;
    } catch (const CheckerMisconfigured& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfigError;
    } catch (const DigestMismatch& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfigError;
    } catch (const TargetNotEmpty& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfigError;
    } catch (const Error& e) {
        std::fprintf(stderr, "environment error: %s\n", e.what());
        return kExitEnvError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "environment error: %s\n", e.what());
        return kExitEnvError;
    }
}
