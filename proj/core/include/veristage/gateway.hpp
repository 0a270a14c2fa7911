#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "veristage/workflow.hpp"

namespace veristage::gateway {

// Tool-call surface for external agents. One structured request per line,
// one response per request, strictly in order. Checker verdicts always travel
// as status=ok payloads; status=error is reserved for protocol and
// environment faults (unknown tool, path escape, command not allowlisted).

using ToolArg = std::variant<std::string, std::vector<std::string>, double, bool>;
using ToolArgs = std::map<std::string, ToolArg>;

struct ToolRequest {
    std::string id; // caller-chosen, unique within a session
    std::string tool;
    ToolArgs args;
};

enum class ToolStatus { Ok, Error };

const char* to_string(ToolStatus status);

struct ToolResponse {
    std::string id;
    ToolStatus status = ToolStatus::Ok;
    std::string content_json; // tool-specific structured payload (JSON object)
    std::string message;      // human-readable summary
};

/// Registered tools: GetCurrentTips, Check, Complete, Status, RunTest,
/// ReadArtifact, WriteArtifact.
std::vector<std::string> registered_tools();

class Session {
public:
    explicit Session(workflow::Engine& engine);

    /// Dispatches one request; every request gets exactly one response with a
    /// matching id. Never throws for agent-caused faults.
    ToolResponse dispatch(const ToolRequest& request);

    bool finished() const;
    const workflow::Engine& engine() const { return engine_; }

private:
    ToolResponse run_tool(const ToolRequest& request);

    workflow::Engine& engine_;
    std::set<std::string> seen_ids_;
};

// --- wire framing -------------------------------------------------------------

std::string serialize_response(const ToolResponse& response);
/// Parses one wire line; returns nullopt (with *error filled) on a malformed
/// request.
std::optional<ToolRequest> parse_request_line(const std::string& line, std::string* error);

/// Serves newline-delimited requests until EOF. State is persisted by the
/// engine after every mutation, so closing the transport is always clean.
void serve_stdio(Session& session, std::istream& in, std::ostream& out);

// --- scripted traces ----------------------------------------------------------

struct TraceStep {
    ToolRequest request;
    std::optional<ToolStatus> expect_status;
};

struct ScriptedTrace {
    std::vector<TraceStep> steps;
};

ScriptedTrace load_trace(const std::filesystem::path& path);
std::string trace_to_json(const ScriptedTrace& trace);

struct ReplayResult {
    std::vector<ToolResponse> responses;
    /// Check/Complete responses whose payload reported passed=false.
    std::size_t failed_checks = 0;
};

/// Replays steps [begin, end) in order; throws AssertionMismatch (with the
/// step index) on the first unmet expected-status assertion.
ReplayResult replay(const ScriptedTrace& trace, Session& session, std::size_t begin = 0,
                    std::size_t end = static_cast<std::size_t>(-1));

// --- chat-completion driver ----------------------------------------------------

struct LlmEndpoint {
    std::string base_url; // e.g. http://127.0.0.1:8080/v1
    std::string model;
    std::string api_key;        // sent as a bearer token when non-empty
    std::size_t step_budget = 500; // LLM exchanges per run
    std::filesystem::path trace_log; // replayable request/response log, optional

    /// Reads VERISTAGE_API_BASE, VERISTAGE_MODEL, VERISTAGE_API_KEY.
    static LlmEndpoint from_env();
};

enum class DriverStatus { Finished, BudgetExhausted, EndpointUnreachable };

const char* to_string(DriverStatus status);

struct DriverResult {
    DriverStatus status = DriverStatus::BudgetExhausted;
    std::size_t steps = 0;
    std::string message;
};

/// Iterative loop: fetch stage context, query the endpoint, execute the tool
/// calls it returns, feed results back, until the workflow finishes, the
/// budget runs out, or the endpoint fails. Both failure modes leave persisted
/// state intact. Every executed exchange is logged to `trace_log` in a format
/// load_trace() accepts.
DriverResult llm_driver(const LlmEndpoint& endpoint, Session& session);

} // namespace veristage::gateway
