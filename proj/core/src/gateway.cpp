#include "veristage/gateway.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "gateway_json.hpp"
#include "veristage/artifacts.hpp"
#include "veristage/errors.hpp"
#include "veristage/process.hpp"

namespace veristage::gateway {

using nlohmann::json;

const char* to_string(ToolStatus status) {
    return status == ToolStatus::Ok ? "ok" : "error";
}

std::vector<std::string> registered_tools() {
    return {"GetCurrentTips", "Check", "Complete", "Status",
            "RunTest",        "ReadArtifact", "WriteArtifact"};
}

namespace {

constexpr std::size_t kMaxArtifactBytes = 4u << 20;

ToolResponse ok_response(const std::string& id, const json& content, std::string message) {
    return {id, ToolStatus::Ok, content.dump(), std::move(message)};
}

ToolResponse error_response(const std::string& id, std::string message,
                            const std::string& error_kind = "") {
    json content = json::object();
    if (!error_kind.empty())
        content["error_kind"] = error_kind;
    return {id, ToolStatus::Error, content.dump(), std::move(message)};
}

const std::string* get_string_arg(const ToolArgs& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end())
        return nullptr;
    return std::get_if<std::string>(&it->second);
}

const std::vector<std::string>* get_list_arg(const ToolArgs& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end())
        return nullptr;
    return std::get_if<std::vector<std::string>>(&it->second);
}

// Workspace containment: relative, and lexically+symlink resolved inside.
std::optional<std::filesystem::path> contained_path(const std::filesystem::path& workspace,
                                                    const std::string& rel) {
    std::filesystem::path p(rel);
    if (rel.empty() || p.is_absolute())
        return std::nullopt;
    std::error_code ec;
    auto base = std::filesystem::weakly_canonical(workspace, ec);
    if (ec)
        return std::nullopt;
    auto full = std::filesystem::weakly_canonical(workspace / p, ec);
    if (ec)
        return std::nullopt;
    auto base_s = base.string();
    auto full_s = full.string();
    if (full_s.size() <= base_s.size() || full_s.compare(0, base_s.size(), base_s) != 0 ||
        full_s[base_s.size()] != '/')
        return std::nullopt;
    return full;
}

json messages_to_json(const checkers::CheckResult& result) {
    json out = json::array();
    for (const auto& m : result.messages) {
        json e = {{"severity", m.severity == checkers::Severity::Error ? "error" : "warning"},
                  {"text", m.text}};
        if (m.locus)
            e["locus"] = {{"path", m.locus->path}, {"offset", m.locus->offset}};
        out.push_back(std::move(e));
    }
    return out;
}

std::string summarize(const checkers::CheckResult& result) {
    if (result.passed)
        return "all checkers passed";
    std::string first;
    for (const auto& m : result.messages)
        if (m.severity == checkers::Severity::Error) {
            first = m.text;
            break;
        }
    return std::to_string(result.error_count()) + " error(s); first: " + first;
}

} // namespace

Session::Session(workflow::Engine& engine) : engine_(engine) {}

bool Session::finished() const {
    return engine_.finished();
}

ToolResponse Session::dispatch(const ToolRequest& request) {
    if (request.id.empty())
        return error_response("", "missing request id");
    if (!seen_ids_.insert(request.id).second)
        return error_response(request.id, "duplicate request id: " + request.id);
    try {
        return run_tool(request);
    } catch (const Error& e) {
        return error_response(request.id, std::string("internal error: ") + e.what());
    }
}

ToolResponse Session::run_tool(const ToolRequest& request) {
    const auto& id = request.id;
    const auto& args = request.args;
    const auto& state = engine_.state();

    if (request.tool == "GetCurrentTips") {
        if (engine_.finished())
            return ok_response(id, {{"finished", true}}, "workflow finished");
        auto brief = engine_.current_brief();
        json c = {{"finished", false},
                  {"stage", brief.name},
                  {"phase", brief.phase},
                  {"description", brief.description},
                  {"tips", brief.tips},
                  {"outputs", brief.outputs},
                  {"checkers", brief.checkers},
                  {"index", brief.index},
                  {"total", brief.total},
                  {"attempts", brief.attempts},
                  {"failures", brief.failures}};
        return ok_response(id, c, brief.to_text());
    }

    if (request.tool == "Check") {
        if (engine_.finished())
            return ok_response(id, {{"finished", true}, {"passed", true}},
                               "workflow already finished");
        std::size_t idx = state.current_index;
        auto result = engine_.run_check();
        json c = {{"finished", false},
                  {"passed", result.passed},
                  {"stage", state.stages[idx].name},
                  {"messages", messages_to_json(result)},
                  {"attempts", state.stages[idx].attempts},
                  {"failures", state.stages[idx].failures}};
        return ok_response(id, c, summarize(result));
    }

    if (request.tool == "Complete") {
        auto outcome = engine_.complete();
        json c = {{"advanced", outcome.advanced},
                  {"finished", outcome.finished},
                  {"already_finished", outcome.already_finished},
                  {"passed", outcome.result.passed},
                  {"stage", outcome.stage},
                  {"messages", messages_to_json(outcome.result)}};
        if (!outcome.next_stage.empty())
            c["next_stage"] = outcome.next_stage;
        std::string msg;
        if (outcome.already_finished)
            msg = "workflow already finished";
        else if (outcome.finished)
            msg = "workflow finished";
        else if (outcome.advanced)
            msg = "advanced to stage " + outcome.next_stage;
        else
            msg = "stage not complete: " + summarize(outcome.result);
        return ok_response(id, c, msg);
    }

    if (request.tool == "Status") {
        json stages = json::array();
        for (const auto& s : state.stages) {
            stages.push_back({{"name", s.name},
                              {"attempts", s.attempts},
                              {"failures", s.failures},
                              {"elapsed_s", s.elapsed_s},
                              {"passed", s.passed},
                              {"skipped", s.skipped}});
        }
        json c = {{"finished", state.finished},
                  {"current_index", state.current_index},
                  {"total", state.stages.size()},
                  {"stages", std::move(stages)}};
        if (!state.finished)
            c["current_stage"] = state.stages[state.current_index].name;
        return ok_response(id, c,
                           state.finished
                               ? "workflow finished"
                               : "at stage " + std::to_string(state.current_index + 1) + "/" +
                                     std::to_string(state.stages.size()));
    }

    if (request.tool == "ReadArtifact") {
        const auto* path = get_string_arg(args, "path");
        if (!path)
            return error_response(id, "bad args: \"path\" (string) required");
        auto full = contained_path(engine_.workspace(), *path);
        if (!full)
            return error_response(id, "PathEscape: " + *path + " leaves the workspace",
                                  "PathEscape");
        std::error_code ec;
        auto size = std::filesystem::file_size(*full, ec);
        if (ec)
            return error_response(id, "file not found: " + *path, "FileUnreadable");
        if (size > kMaxArtifactBytes)
            return error_response(id, "artifact too large: " + *path, "FileUnreadable");
        try {
            return ok_response(id, {{"path", *path}, {"content", artifacts::read_text_file(*full)}},
                               "read " + *path);
        } catch (const FileUnreadable&) {
            return error_response(id, "file not found: " + *path, "FileUnreadable");
        }
    }

    if (request.tool == "WriteArtifact") {
        const auto* path = get_string_arg(args, "path");
        const auto* content = get_string_arg(args, "content");
        if (!path || !content)
            return error_response(id, "bad args: \"path\" and \"content\" (strings) required");
        auto full = contained_path(engine_.workspace(), *path);
        if (!full)
            return error_response(id, "PathEscape: " + *path + " leaves the workspace",
                                  "PathEscape");
        std::error_code ec;
        std::filesystem::create_directories(full->parent_path(), ec);
        std::ofstream out(*full, std::ios::binary | std::ios::trunc);
        out << *content;
        if (!out)
            return error_response(id, "cannot write: " + *path, "FileUnreadable");
        return ok_response(id, {{"path", *path}, {"bytes_written", content->size()}},
                           "wrote " + *path);
    }

    if (request.tool == "RunTest") {
        const auto& allowed = engine_.config().allowed_commands;
        std::string command;
        if (const auto* c = get_string_arg(args, "command"))
            command = *c;
        else if (!allowed.empty())
            command = allowed.front();
        else
            return error_response(id, "NotAllowlisted: no allowed commands configured",
                                  "NotAllowlisted");
        if (std::find(allowed.begin(), allowed.end(), command) == allowed.end())
            return error_response(
                id, "NotAllowlisted: \"" + command + "\" is not in allowed_commands",
                "NotAllowlisted");
        const auto* report_path = get_string_arg(args, "report_path");
        if (!report_path)
            return error_response(id, "bad args: \"report_path\" (string) required");

        std::vector<std::string> argv{command};
        if (const auto* extra = get_list_arg(args, "args"))
            argv.insert(argv.end(), extra->begin(), extra->end());

        auto res = proc::run_process(argv, engine_.workspace(),
                                     engine_.config().command_timeout_s);
        json c = {{"exit_code", res.exit_code},
                  {"timed_out", res.timed_out},
                  {"output_tail", res.output},
                  {"report_valid", false}};
        std::string msg = "exit code " + std::to_string(res.exit_code);
        auto report_full = contained_path(engine_.workspace(), *report_path);
        if (!report_full)
            return error_response(id, "PathEscape: " + *report_path + " leaves the workspace",
                                  "PathEscape");
        try {
            auto report = artifacts::parse_test_report(*report_full);
            std::size_t passed = 0, failed = 0, skipped = 0;
            for (const auto& tc : report.cases) {
                if (tc.status == artifacts::TestStatus::Pass)
                    ++passed;
                else if (tc.status == artifacts::TestStatus::Fail)
                    ++failed;
                else
                    ++skipped;
            }
            c["report_valid"] = true;
            c["cases_total"] = report.cases.size();
            c["cases_passed"] = passed;
            c["cases_failed"] = failed;
            c["cases_skipped"] = skipped;
            msg += "; report: " + std::to_string(passed) + " passed, " +
                   std::to_string(failed) + " failed, " + std::to_string(skipped) + " skipped";
        } catch (const Error& e) {
            msg += std::string("; report problem: ") + e.what();
        }
        return ok_response(id, c, msg);
    }

    return error_response(id, "unknown tool: " + request.tool);
}

// --- wire framing -------------------------------------------------------------

std::string serialize_response(const ToolResponse& response) {
    json j = {{"id", response.id},
              {"status", to_string(response.status)},
              {"content", json::parse(response.content_json)},
              {"message", response.message}};
    return j.dump();
}

std::optional<ToolRequest> parse_request_line(const std::string& line, std::string* error) {
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
        if (error)
            *error = "unparseable request";
        return std::nullopt;
    }
    ToolRequest req;
    if (!j.contains("id") || !j["id"].is_string() || !j.contains("tool") ||
        !j["tool"].is_string()) {
        if (error)
            *error = "request needs string fields \"id\" and \"tool\"";
        return std::nullopt;
    }
    req.id = j["id"].get<std::string>();
    req.tool = j["tool"].get<std::string>();
    if (j.contains("args")) {
        auto args = wire::args_from_json(j["args"], error);
        if (!args)
            return std::nullopt;
        req.args = std::move(*args);
    }
    return req;
}

void serve_stdio(Session& session, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::string error;
        ToolResponse response;
        if (auto req = parse_request_line(line, &error)) {
            response = session.dispatch(*req);
        } else {
            json j = json::parse(line, nullptr, false);
            std::string id =
                (!j.is_discarded() && j.is_object() && j.contains("id") && j["id"].is_string())
                    ? j["id"].get<std::string>()
                    : "";
            response = error_response(id, error);
        }
        out << serialize_response(response) << '\n';
        out.flush();
    }
}

// --- scripted traces ----------------------------------------------------------

ScriptedTrace load_trace(const std::filesystem::path& path) {
    auto text = artifacts::read_text_file(path);
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_array())
        throw SchemaViolation("trace file must be a JSON array: " + path.string());
    ScriptedTrace trace;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const json& e = j[i];
        std::string where = "trace[" + std::to_string(i) + "]";
        if (!e.is_object() || !e.contains("tool") || !e["tool"].is_string())
            throw SchemaViolation(where + ": expected an object with a \"tool\" string");
        TraceStep step;
        step.request.id = e.contains("id") && e["id"].is_string() ? e["id"].get<std::string>()
                                                                  : "t" + std::to_string(i);
        step.request.tool = e["tool"].get<std::string>();
        if (e.contains("args")) {
            std::string error;
            auto args = wire::args_from_json(e["args"], &error);
            if (!args)
                throw SchemaViolation(where + ".args: " + error);
            step.request.args = std::move(*args);
        }
        if (e.contains("expect_status")) {
            if (!e["expect_status"].is_string())
                throw SchemaViolation(where + ".expect_status: expected \"ok\" or \"error\"");
            auto s = e["expect_status"].get<std::string>();
            if (s == "ok")
                step.expect_status = ToolStatus::Ok;
            else if (s == "error")
                step.expect_status = ToolStatus::Error;
            else
                throw SchemaViolation(where + ".expect_status: expected \"ok\" or \"error\"");
        }
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

std::string trace_to_json(const ScriptedTrace& trace) {
    json j = json::array();
    for (const auto& step : trace.steps) {
        json e = {{"id", step.request.id},
                  {"tool", step.request.tool},
                  {"args", wire::args_to_json(step.request.args)}};
        if (step.expect_status)
            e["expect_status"] = to_string(*step.expect_status);
        j.push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

ReplayResult replay(const ScriptedTrace& trace, Session& session, std::size_t begin,
                    std::size_t end) {
    ReplayResult result;
    end = std::min(end, trace.steps.size());
    for (std::size_t i = begin; i < end; ++i) {
        const auto& step = trace.steps[i];
        auto response = session.dispatch(step.request);
        if (step.expect_status && response.status != *step.expect_status)
            throw AssertionMismatch(i, "trace step " + std::to_string(i) + " (" +
                                           step.request.tool + ") expected status " +
                                           to_string(*step.expect_status) + ", got " +
                                           to_string(response.status) + ": " + response.message);
        if (response.status == ToolStatus::Ok &&
            (step.request.tool == "Check" || step.request.tool == "Complete")) {
            json c = json::parse(response.content_json, nullptr, false);
            if (!c.is_discarded() && c.is_object() && c.value("passed", true) == false)
                ++result.failed_checks;
        }
        result.responses.push_back(std::move(response));
    }
    return result;
}

} // namespace veristage::gateway
