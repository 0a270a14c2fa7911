#include <cstdlib>
#include <fstream>

#include <httplib.h>

#include "gateway_json.hpp"
#include "veristage/gateway.hpp"

namespace veristage::gateway {

using nlohmann::json;

const char* to_string(DriverStatus status) {
    switch (status) {
    case DriverStatus::Finished: return "finished";
    case DriverStatus::BudgetExhausted: return "budget_exhausted";
    case DriverStatus::EndpointUnreachable: return "endpoint_unreachable";
    }
    return "??";
}

LlmEndpoint LlmEndpoint::from_env() {
    LlmEndpoint ep;
    if (const char* v = std::getenv("VERISTAGE_API_BASE"))
        ep.base_url = v;
    if (const char* v = std::getenv("VERISTAGE_MODEL"))
        ep.model = v;
    if (const char* v = std::getenv("VERISTAGE_API_KEY"))
        ep.api_key = v;
    return ep;
}

namespace {

constexpr const char* kSystemPrompt =
    "You are driving a staged verification workflow through tool calls. "
    "Each stage describes a task, the files it must produce, and the gates "
    "that validate them. Work one stage at a time: write the required "
    "artifacts with WriteArtifact, validate with Check, fix what the gate "
    "messages report, and advance with Complete. Use Status to see overall "
    "progress and RunTest to execute the configured test command.";

json object_schema(std::initializer_list<std::pair<const char*, const char*>> props,
                   std::initializer_list<const char*> required) {
    json properties = json::object();
    for (const auto& [name, desc] : props)
        properties[name] = {{"type", name == std::string("args") ? "array" : "string"},
                            {"description", desc}};
    if (properties.contains("args"))
        properties["args"]["items"] = {{"type", "string"}};
    json schema = {{"type", "object"}, {"properties", properties}};
    json req = json::array();
    for (const char* r : required)
        req.push_back(r);
    schema["required"] = req;
    return schema;
}

json tool_schemas() {
    auto entry = [](const char* name, const char* desc, json params) {
        return json{{"type", "function"},
                    {"function",
                     {{"name", name}, {"description", desc}, {"parameters", params}}}};
    };
    json tools = json::array();
    tools.push_back(entry("GetCurrentTips", "Retrieve the active stage's task, tips and gates.",
                          object_schema({}, {})));
    tools.push_back(entry("Check", "Run the active stage's checkers without advancing.",
                          object_schema({}, {})));
    tools.push_back(entry("Complete",
                          "Re-run the active stage's checkers and advance when they all pass.",
                          object_schema({}, {})));
    tools.push_back(entry("Status", "Summarize all stages and overall progress.",
                          object_schema({}, {})));
    tools.push_back(entry(
        "RunTest", "Run an allowlisted test command and parse the report it produces.",
        object_schema({{"command", "allowlisted command to run (default: first allowlisted)"},
                       {"args", "extra command arguments"},
                       {"report_path", "workspace-relative path of the produced report"}},
                      {"report_path"})));
    tools.push_back(entry("ReadArtifact", "Read a workspace file.",
                          object_schema({{"path", "workspace-relative file path"}}, {"path"})));
    tools.push_back(entry(
        "WriteArtifact", "Create or overwrite a workspace file.",
        object_schema({{"path", "workspace-relative file path"}, {"content", "file content"}},
                      {"path", "content"})));
    return tools;
}

void split_url(const std::string& base_url, std::string& host, std::string& prefix) {
    auto scheme = base_url.find("://");
    auto from = scheme == std::string::npos ? 0 : scheme + 3;
    auto slash = base_url.find('/', from);
    if (slash == std::string::npos) {
        host = base_url;
        prefix.clear();
    } else {
        host = base_url.substr(0, slash);
        prefix = base_url.substr(slash);
    }
    while (!prefix.empty() && prefix.back() == '/')
        prefix.pop_back();
}

} // namespace

DriverResult llm_driver(const LlmEndpoint& endpoint, Session& session) {
    DriverResult out;
    json trace_log = json::array();
    auto flush_log = [&] {
        if (endpoint.trace_log.empty())
            return;
        std::ofstream f(endpoint.trace_log, std::ios::binary | std::ios::trunc);
        f << trace_log.dump(2) << '\n';
    };

    std::string host, prefix;
    split_url(endpoint.base_url, host, prefix);
    httplib::Client client(host);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(300, 0);
    httplib::Headers headers;
    if (!endpoint.api_key.empty())
        headers.emplace("Authorization", "Bearer " + endpoint.api_key);

    json messages = json::array();
    messages.push_back({{"role", "system"}, {"content", kSystemPrompt}});
    std::size_t seen_index = static_cast<std::size_t>(-1);
    std::size_t call_counter = 0;

    while (out.steps < endpoint.step_budget) {
        if (session.finished())
            break;
        std::size_t index = session.engine().state().current_index;
        if (index != seen_index) {
            seen_index = index;
            messages.push_back(
                {{"role", "user"},
                 {"content", session.engine().current_brief().to_text() +
                                 "\nUse the tools; call Complete once the gates pass."}});
        }

        json body = {{"model", endpoint.model}, {"messages", messages}, {"tools", tool_schemas()}};
        auto res = client.Post(prefix + "/chat/completions", headers, body.dump(),
                               "application/json");
        ++out.steps;
        if (!res) {
            out.status = DriverStatus::EndpointUnreachable;
            out.message = "endpoint unreachable: " + endpoint.base_url + " (" +
                          httplib::to_string(res.error()) + ")";
            flush_log();
            return out;
        }
        if (res->status != 200) {
            out.status = DriverStatus::EndpointUnreachable;
            out.message = "endpoint returned HTTP " + std::to_string(res->status);
            flush_log();
            return out;
        }
        json reply = json::parse(res->body, nullptr, /*allow_exceptions=*/false);
        if (reply.is_discarded() || !reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty()) {
            out.status = DriverStatus::EndpointUnreachable;
            out.message = "malformed endpoint response";
            flush_log();
            return out;
        }
        json message = reply["choices"][0].value("message", json::object());
        messages.push_back(message.is_object() ? message
                                               : json{{"role", "assistant"}, {"content", ""}});

        bool executed_any = false;
        if (message.is_object() && message.contains("tool_calls") &&
            message["tool_calls"].is_array()) {
            for (const auto& call : message["tool_calls"]) {
                std::string call_id = call.is_object() ? call.value("id", "call") : "call";
                std::string name;
                std::string arguments;
                if (call.is_object() && call.contains("function") && call["function"].is_object()) {
                    name = call["function"].value("name", "");
                    arguments = call["function"].value("arguments", "");
                }
                json args_json = json::parse(arguments, nullptr, /*allow_exceptions=*/false);
                std::string error;
                std::optional<ToolArgs> args;
                if (!name.empty() && !args_json.is_discarded())
                    args = wire::args_from_json(args_json, &error);
                if (!args) {
                    messages.push_back({{"role", "tool"},
                                        {"tool_call_id", call_id},
                                        {"content", "unparseable tool call"}});
                    continue;
                }
                executed_any = true;
                ToolRequest request{"drv-" + std::to_string(++call_counter), name, *args};
                auto response = session.dispatch(request);
                json response_json = {{"status", to_string(response.status)},
                                      {"content", json::parse(response.content_json)},
                                      {"message", response.message}};
                trace_log.push_back({{"id", request.id},
                                     {"tool", name},
                                     {"args", args_json},
                                     {"response", response_json}});
                messages.push_back({{"role", "tool"},
                                    {"tool_call_id", call_id},
                                    {"content", response_json.dump()}});
            }
        }
        if (!executed_any && !(message.is_object() && message.contains("tool_calls")))
            messages.push_back(
                {{"role", "user"},
                 {"content", "Reply with a tool call; use Status to check progress."}});
    }

    if (session.finished()) {
        out.status = DriverStatus::Finished;
        out.message = "workflow finished after " + std::to_string(out.steps) + " exchanges";
    } else if (out.status == DriverStatus::BudgetExhausted) {
        out.message = "step budget of " + std::to_string(endpoint.step_budget) + " exhausted";
    }
    flush_log();
    return out;
}

} // namespace veristage::gateway
