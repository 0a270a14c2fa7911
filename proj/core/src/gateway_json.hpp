#pragma once

// Conversions between ToolArgs and their wire JSON form, shared by the
// session transport and the chat-completion driver.

#include <optional>
#include <string>

#include <json.hpp>

#include "veristage/gateway.hpp"

namespace veristage::gateway::wire {

inline nlohmann::json args_to_json(const ToolArgs& args) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, value] : args)
        std::visit([&, k = key](const auto& v) { j[k] = v; }, value);
    return j;
}

// Accepted value shapes: string, boolean, number, list of strings.
inline std::optional<ToolArgs> args_from_json(const nlohmann::json& j, std::string* error) {
    if (!j.is_object()) {
        if (error)
            *error = "args must be an object";
        return std::nullopt;
    }
    ToolArgs out;
    for (const auto& [key, value] : j.items()) {
        if (value.is_string()) {
            out.emplace(key, value.get<std::string>());
        } else if (value.is_boolean()) {
            out.emplace(key, value.get<bool>());
        } else if (value.is_number()) {
            out.emplace(key, value.get<double>());
        } else if (value.is_array()) {
            std::vector<std::string> list;
            for (const auto& item : value) {
                if (!item.is_string()) {
                    if (error)
                        *error = "arg \"" + key + "\" must be a list of strings";
                    return std::nullopt;
                }
                list.push_back(item.get<std::string>());
            }
            out.emplace(key, std::move(list));
        } else {
            if (error)
                *error = "arg \"" + key + "\" has an unsupported type";
            return std::nullopt;
        }
    }
    return out;
}

} // namespace veristage::gateway::wire
