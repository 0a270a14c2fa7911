#include <cstdint>
#include <cstdio>
#include <map>
#include <set>

#include <yaml-cpp/yaml.h>

#include <json.hpp>

#include "veristage/errors.hpp"
#include "veristage/workflow.hpp"

namespace veristage::workflow {

namespace {

using nlohmann::json;

[[noreturn]] void invalid(const std::string& where, const std::string& why) {
    throw ConfigInvalid("invalid workflow config at " + where + ": " + why);
}

void expect_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                 const std::string& where) {
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            invalid(where + "." + key, "unknown key");
    }
}

std::string as_string(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsScalar())
        invalid(where, "expected a string");
    return node.as<std::string>();
}

double as_number(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsScalar())
        invalid(where, "expected a number");
    try {
        return node.as<double>();
    } catch (const YAML::Exception&) {
        invalid(where, "expected a number");
    }
}

bool as_bool(const YAML::Node& node, const std::string& where) {
    if (!node || !node.IsScalar())
        invalid(where, "expected a boolean");
    try {
        return node.as<bool>();
    } catch (const YAML::Exception&) {
        invalid(where, "expected a boolean");
    }
}

std::vector<std::string> as_string_list(const YAML::Node& node, const std::string& where) {
    if (!node.IsSequence())
        invalid(where, "expected a list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < node.size(); ++i)
        out.push_back(as_string(node[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

std::string require_param(const YAML::Node& params, const char* key, const std::string& where) {
    if (!params[key])
        invalid(where + "." + key, "required param missing");
    return as_string(params[key], where + "." + key);
}

checkers::CheckerSpec parse_checker(const YAML::Node& node, const std::string& where) {
    if (!node.IsMap())
        invalid(where, "expected a map");
    expect_keys(node, {"kind", "params"}, where);
    if (!node["kind"])
        invalid(where + ".kind", "required");
    std::string kind_name = as_string(node["kind"], where + ".kind");
    auto kind = checkers::checker_kind_from_string(kind_name);
    if (!kind)
        invalid(where + ".kind", "unknown checker kind \"" + kind_name + "\"");

    YAML::Node params = node["params"] ? node["params"] : YAML::Node(YAML::NodeType::Map);
    if (!params.IsMap())
        invalid(where + ".params", "expected a map");
    const std::string pw = where + ".params";

    checkers::CheckerSpec spec;
    spec.kind = *kind;
    switch (*kind) {
    case checkers::CheckerKind::FileExists: {
        expect_keys(params, {"path"}, pw);
        spec.params = checkers::FileExistsParams{require_param(params, "path", pw)};
        break;
    }
    case checkers::CheckerKind::LabelSyntax: {
        expect_keys(params, {"document"}, pw);
        spec.params = checkers::LabelSyntaxParams{require_param(params, "document", pw)};
        break;
    }
    case checkers::CheckerKind::CoverageConsistency: {
        expect_keys(params, {"spec_document", "coverage_files"}, pw);
        checkers::CoverageConsistencyParams p;
        p.spec_document = require_param(params, "spec_document", pw);
        if (!params["coverage_files"])
            invalid(pw + ".coverage_files", "required param missing");
        p.coverage_files = as_string_list(params["coverage_files"], pw + ".coverage_files");
        if (p.coverage_files.empty())
            invalid(pw + ".coverage_files", "must list at least one file");
        spec.params = std::move(p);
        break;
    }
    case checkers::CheckerKind::TestReportClosure: {
        expect_keys(params, {"spec_document", "report", "bug_document"}, pw);
        checkers::TestReportClosureParams p;
        p.spec_document = require_param(params, "spec_document", pw);
        p.report = require_param(params, "report", pw);
        p.bug_document = require_param(params, "bug_document", pw);
        spec.params = std::move(p);
        break;
    }
    case checkers::CheckerKind::Command: {
        expect_keys(params, {"command", "args", "timeout_s", "report_path", "output_tail_bytes"},
                    pw);
        checkers::CommandParams p;
        p.command = require_param(params, "command", pw);
        if (params["args"])
            p.args = as_string_list(params["args"], pw + ".args");
        if (params["timeout_s"]) {
            p.timeout_s = as_number(params["timeout_s"], pw + ".timeout_s");
            if (p.timeout_s <= 0)
                invalid(pw + ".timeout_s", "must be positive");
        }
        if (params["report_path"])
            p.report_path = as_string(params["report_path"], pw + ".report_path");
        if (params["output_tail_bytes"]) {
            double v = as_number(params["output_tail_bytes"], pw + ".output_tail_bytes");
            if (v < 1)
                invalid(pw + ".output_tail_bytes", "must be positive");
            p.output_tail_bytes = static_cast<std::size_t>(v);
        }
        spec.params = std::move(p);
        break;
    }
    case checkers::CheckerKind::ManualGate: {
        expect_keys(params, {"token_file"}, pw);
        spec.params = checkers::ManualGateParams{require_param(params, "token_file", pw)};
        break;
    }
    }
    return spec;
}

VerifyStage parse_stage(const YAML::Node& node, const std::string& where) {
    if (!node.IsMap())
        invalid(where, "expected a map");
    expect_keys(node,
                {"name", "description", "tips", "phase", "outputs", "checkers", "skippable",
                 "substages"},
                where);
    VerifyStage stage;
    if (!node["name"])
        invalid(where + ".name", "required");
    stage.name = as_string(node["name"], where + ".name");
    if (stage.name.empty())
        invalid(where + ".name", "must be non-empty");
    if (node["description"])
        stage.description = as_string(node["description"], where + ".description");
    if (node["tips"])
        stage.tips = as_string(node["tips"], where + ".tips");
    if (node["phase"])
        stage.phase = as_string(node["phase"], where + ".phase");
    if (node["outputs"])
        stage.outputs = as_string_list(node["outputs"], where + ".outputs");
    if (node["checkers"]) {
        const YAML::Node& list = node["checkers"];
        if (!list.IsSequence())
            invalid(where + ".checkers", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i)
            stage.checkers.push_back(
                parse_checker(list[i], where + ".checkers[" + std::to_string(i) + "]"));
    }
    if (node["skippable"])
        stage.skippable = as_bool(node["skippable"], where + ".skippable");
    if (node["substages"]) {
        const YAML::Node& list = node["substages"];
        if (!list.IsSequence())
            invalid(where + ".substages", "expected a list");
        for (std::size_t i = 0; i < list.size(); ++i)
            stage.substages.push_back(
                parse_stage(list[i], where + ".substages[" + std::to_string(i) + "]"));
    }
    return stage;
}

void check_unique_names(const std::vector<VerifyStage>& stages, const std::string& prefix,
                        std::map<std::string, std::string>& seen) {
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        std::string where = prefix + "[" + std::to_string(i) + "]";
        auto [it, inserted] = seen.emplace(s.name, where);
        if (!inserted)
            invalid(where + ".name",
                    "duplicate stage name \"" + s.name + "\" (also at " + it->second + ")");
        check_unique_names(s.substages, where + ".substages", seen);
    }
}

// Canonical JSON form of the config: semantic content only, so comments and
// formatting never invalidate persisted state.
json canonical(const checkers::CheckerSpec& spec);

json canonical(const VerifyStage& stage) {
    json j;
    j["name"] = stage.name;
    j["description"] = stage.description;
    j["tips"] = stage.tips;
    j["phase"] = stage.phase;
    j["outputs"] = stage.outputs;
    j["skippable"] = stage.skippable;
    j["checkers"] = json::array();
    for (const auto& c : stage.checkers)
        j["checkers"].push_back(canonical(c));
    j["substages"] = json::array();
    for (const auto& s : stage.substages)
        j["substages"].push_back(canonical(s));
    return j;
}

json canonical(const checkers::CheckerSpec& spec) {
    json j;
    j["kind"] = checkers::to_string(spec.kind);
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, checkers::FileExistsParams>) {
                j["path"] = p.path;
            } else if constexpr (std::is_same_v<T, checkers::LabelSyntaxParams>) {
                j["document"] = p.document;
            } else if constexpr (std::is_same_v<T, checkers::CoverageConsistencyParams>) {
                j["spec_document"] = p.spec_document;
                j["coverage_files"] = p.coverage_files;
            } else if constexpr (std::is_same_v<T, checkers::TestReportClosureParams>) {
                j["spec_document"] = p.spec_document;
                j["report"] = p.report;
                j["bug_document"] = p.bug_document;
            } else if constexpr (std::is_same_v<T, checkers::CommandParams>) {
                j["command"] = p.command;
                j["args"] = p.args;
                j["timeout_s"] = p.timeout_s;
                j["report_path"] = p.report_path ? json(*p.report_path) : json(nullptr);
                j["output_tail_bytes"] = p.output_tail_bytes;
            } else if constexpr (std::is_same_v<T, checkers::ManualGateParams>) {
                j["token_file"] = p.token_file;
            }
        },
        spec.params);
    return j;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void flatten_into(const VerifyStage& stage, std::vector<const VerifyStage*>& out) {
    for (const auto& sub : stage.substages)
        flatten_into(sub, out);
    out.push_back(&stage);
}

} // namespace

std::vector<const VerifyStage*> WorkflowConfig::flattened() const {
    std::vector<const VerifyStage*> out;
    for (const auto& s : stages)
        flatten_into(s, out);
    return out;
}

const VerifyStage* WorkflowConfig::find(const std::string& name) const {
    for (const auto* s : flattened())
        if (s->name == name)
            return s;
    return nullptr;
}

void validate_skip(const WorkflowConfig& config, const std::set<std::string>& skip) {
    for (const auto& name : skip) {
        const auto* stage = config.find(name);
        if (!stage)
            invalid("skip", "unknown stage \"" + name + "\"");
        if (!stage->skippable)
            invalid("skip", "stage \"" + name + "\" is not skippable");
    }
}

namespace {

WorkflowConfig load_config_checked(const std::string& yaml_text, const std::string& source_name) {
    YAML::Node root = YAML::Load(yaml_text);
    if (!root.IsMap())
        invalid("top level", "expected a map");
    expect_keys(root, {"version", "stages", "skip", "allowed_commands", "command_timeout_s"},
                "top level");

    WorkflowConfig config;
    config.source = source_name;
    if (!root["version"])
        invalid("version", "required");
    config.version = as_string(root["version"], "version");
    if (!root["stages"])
        invalid("stages", "required");
    const YAML::Node& stages = root["stages"];
    if (!stages.IsSequence())
        invalid("stages", "expected a list");
    for (std::size_t i = 0; i < stages.size(); ++i)
        config.stages.push_back(parse_stage(stages[i], "stages[" + std::to_string(i) + "]"));

    if (root["skip"])
        for (const auto& name : as_string_list(root["skip"], "skip"))
            config.skip.insert(name);
    if (root["allowed_commands"])
        config.allowed_commands = as_string_list(root["allowed_commands"], "allowed_commands");
    if (root["command_timeout_s"]) {
        config.command_timeout_s = as_number(root["command_timeout_s"], "command_timeout_s");
        if (config.command_timeout_s <= 0)
            invalid("command_timeout_s", "must be positive");
    }

    std::map<std::string, std::string> seen;
    check_unique_names(config.stages, "stages", seen);
    validate_skip(config, config.skip);

    json canon;
    canon["version"] = config.version;
    canon["stages"] = json::array();
    for (const auto& s : config.stages)
        canon["stages"].push_back(canonical(s));
    canon["skip"] = std::vector<std::string>(config.skip.begin(), config.skip.end());
    canon["allowed_commands"] = config.allowed_commands;
    canon["command_timeout_s"] = config.command_timeout_s;
    config.digest = "fnv1a:" + fnv1a_hex(canon.dump());
    return config;
}

} // namespace

WorkflowConfig load_config_text(const std::string& yaml_text, const std::string& source_name) {
    try {
        return load_config_checked(yaml_text, source_name);
    } catch (const YAML::Exception& e) {
        // Anything the walkers do not guard explicitly (exotic tags,
        // non-scalar map keys) is still a config problem, not a crash.
        throw ConfigInvalid("invalid workflow config " + source_name + ": " + e.what());
    }
}

WorkflowConfig load_config(const std::filesystem::path& path) {
    std::string text;
    try {
        text = artifacts::read_text_file(path);
    } catch (const FileUnreadable& e) {
        throw ConfigInvalid(std::string("cannot read workflow config: ") + e.what());
    }
    auto config = load_config_text(text, path.string());
    config.source = path;
    return config;
}

} // namespace veristage::workflow
