#include <chrono>
#include <ctime>
#include <fstream>

#include <unistd.h>

#include <json.hpp>

#include "veristage/artifacts.hpp"
#include "veristage/errors.hpp"
#include "veristage/workflow.hpp"

namespace veristage::workflow {

using nlohmann::json;

namespace detail {

std::string now_iso8601() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double now_epoch_s() {
    return std::chrono::duration<double>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace detail

namespace {

[[noreturn]] void corrupt(const std::string& why) {
    throw StateCorrupt("state file corrupt: " + why);
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.contains(key))
        corrupt(std::string("missing field \"") + key + "\"");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        corrupt(std::string("field \"") + key + "\" has the wrong type");
    }
}

void validate(const WorkflowState& st) {
    if (st.current_index > st.stages.size())
        corrupt("current_index past the end");
    if (st.finished != (st.current_index == st.stages.size()))
        corrupt("finished flag inconsistent with current_index");
    for (std::size_t i = 0; i < st.stages.size(); ++i) {
        const auto& s = st.stages[i];
        if (s.failures > s.attempts)
            corrupt("failures exceed attempts for stage " + s.name);
        if (s.elapsed_s < 0)
            corrupt("negative elapsed_s for stage " + s.name);
        if (i < st.current_index && !(s.passed || s.skipped))
            corrupt("stage " + s.name + " behind current_index neither passed nor skipped");
        if (i >= st.current_index && (s.passed || s.skipped))
            corrupt("stage " + s.name + " ahead of current_index marked passed or skipped");
    }
}

} // namespace

void persist_state(const WorkflowState& state, const std::filesystem::path& path) {
    json j;
    j["version"] = 1;
    j["config_digest"] = state.config_digest;
    j["current_index"] = state.current_index;
    j["finished"] = state.finished;
    j["skip"] = std::vector<std::string>(state.skip.begin(), state.skip.end());
    j["created_at"] = state.created_at;
    j["updated_at"] = state.updated_at;
    j["active_since_epoch_s"] = state.active_since_epoch_s;
    j["stages"] = json::array();
    for (const auto& s : state.stages) {
        j["stages"].push_back({{"name", s.name},
                               {"attempts", s.attempts},
                               {"failures", s.failures},
                               {"elapsed_s", s.elapsed_s},
                               {"passed", s.passed},
                               {"skipped", s.skipped}});
    }

    auto parent = path.parent_path();
    if (!parent.empty())
        std::filesystem::create_directories(parent);
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << j.dump(2) << '\n';
        if (!out)
            throw Error("cannot write state file: " + tmp.string());
    }
    std::filesystem::rename(tmp, path); // atomic on POSIX
}

WorkflowState restore_state(const std::filesystem::path& path) {
    std::string text;
    try {
        text = artifacts::read_text_file(path);
    } catch (const FileUnreadable&) {
        throw FileUnreadable("no state file at " + path.string());
    }
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
        corrupt("not a JSON object: " + path.string());

    WorkflowState st;
    st.config_digest = field<std::string>(j, "config_digest");
    st.current_index = field<std::size_t>(j, "current_index");
    st.finished = field<bool>(j, "finished");
    for (const auto& name : field<std::vector<std::string>>(j, "skip"))
        st.skip.insert(name);
    st.created_at = field<std::string>(j, "created_at");
    st.updated_at = field<std::string>(j, "updated_at");
    st.active_since_epoch_s = field<double>(j, "active_since_epoch_s");
    if (!j.contains("stages") || !j["stages"].is_array())
        corrupt("missing stages array");
    for (const auto& e : j["stages"]) {
        if (!e.is_object())
            corrupt("stage entry is not an object");
        StageState s;
        s.name = field<std::string>(e, "name");
        s.attempts = field<std::uint64_t>(e, "attempts");
        s.failures = field<std::uint64_t>(e, "failures");
        s.elapsed_s = field<double>(e, "elapsed_s");
        s.passed = field<bool>(e, "passed");
        s.skipped = field<bool>(e, "skipped");
        st.stages.push_back(std::move(s));
    }
    validate(st);
    return st;
}

WorkflowState restore_state(const std::filesystem::path& path, const WorkflowConfig& config) {
    auto st = restore_state(path);
    if (st.config_digest != config.digest)
        throw DigestMismatch("state was written under a different config (state " +
                             st.config_digest + ", config " + config.digest +
                             "); start a new run or restore the original config");
    auto flat = config.flattened();
    if (flat.size() != st.stages.size())
        corrupt("stage count differs from config");
    for (std::size_t i = 0; i < flat.size(); ++i)
        if (flat[i]->name != st.stages[i].name)
            corrupt("stage order differs from config at index " + std::to_string(i));
    return st;
}

} // namespace veristage::workflow
