#pragma once

// Loopback chat-completion endpoint for driver tests. Each scripted turn is
// one assistant message; the server replays them in order and falls back to a
// plain-text message once exhausted.

#include <atomic>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "veristage/gateway.hpp"

namespace testutil {

inline nlohmann::json tool_call_message(const std::string& call_id, const std::string& tool,
                                        const nlohmann::json& args) {
    return {{"role", "assistant"},
            {"content", nullptr},
            {"tool_calls",
             {{{"id", call_id},
               {"type", "function"},
               {"function", {{"name", tool}, {"arguments", args.dump()}}}}}}};
}

inline nlohmann::json args_to_json(const veristage::gateway::ToolArgs& args) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : args)
        std::visit([&](const auto& v) { j[key] = v; }, value);
    return j;
}

// One assistant turn per trace step, so a driver run against the mock matches
// replay() of the same trace.
inline std::vector<nlohmann::json> turns_from_trace(const veristage::gateway::ScriptedTrace& trace) {
    std::vector<nlohmann::json> turns;
    std::size_t n = 0;
    for (const auto& step : trace.steps)
        turns.push_back(tool_call_message("call-" + std::to_string(n++), step.request.tool,
                                          args_to_json(step.request.args)));
    return turns;
}

class MockChatServer {
public:
    explicit MockChatServer(std::vector<nlohmann::json> turns) : turns_(std::move(turns)) {
        server_.Post("/v1/chat/completions",
                     [this](const httplib::Request& req, httplib::Response& res) {
                         ++requests_;
                         last_request_ = req.body;
                         nlohmann::json message;
                         std::size_t i = next_++;
                         if (i < turns_.size())
                             message = turns_[i];
                         else
                             message = {{"role", "assistant"},
                                        {"content", "nothing further to do"}};
                         nlohmann::json body = {
                             {"id", "mock-" + std::to_string(i)},
                             {"object", "chat.completion"},
                             {"choices",
                              {{{"index", 0}, {"message", message}, {"finish_reason", "stop"}}}}};
                         res.set_content(body.dump(), "application/json");
                     });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockChatServer() {
        server_.stop();
        if (thread_.joinable())
            thread_.join();
    }

    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
    std::size_t requests() const { return requests_; }
    std::string last_request() const { return last_request_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
    std::vector<nlohmann::json> turns_;
    std::atomic<std::size_t> next_{0};
    std::atomic<std::size_t> requests_{0};
    std::string last_request_;
};

} // namespace testutil
