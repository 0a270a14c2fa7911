#include "doctest.h"

#include <array>
#include <chrono>
#include <map>

#include <json.hpp>

#include "mock_chat.hpp"
#include "test_util.hpp"
#include "veristage/checkers.hpp"
#include "veristage/gateway.hpp"
#include "veristage/reporting.hpp"
#include "veristage/scaffold.hpp"
#include "veristage/workflow.hpp"

using namespace veristage;
using nlohmann::json;
using testutil::TempDir;
using testutil::write_file;

namespace {

json normalized_state(const std::filesystem::path& state_file) {
    auto j = json::parse(testutil::read_file(state_file));
    j.erase("created_at");
    j.erase("updated_at");
    j.erase("active_since_epoch_s");
    for (auto& s : j["stages"])
        s.erase("elapsed_s");
    return j;
}

const char* kThreeStageYaml = R"(version: "1"
stages:
  - name: s0
    phase: build
    checkers: [{ kind: file_exists, params: { path: w0 } }]
  - name: s1
    phase: build
    checkers: [{ kind: file_exists, params: { path: w1 } }]
  - name: s2
    phase: ship
    checkers: [{ kind: file_exists, params: { path: w2 } }]
)";

workflow::WorkflowConfig three_stage_config(const TempDir& dir) {
    write_file(dir / "workflow.yaml", kThreeStageYaml);
    return workflow::load_config(dir / "workflow.yaml");
}

gateway::ToolRequest req(std::string id, std::string tool, gateway::ToolArgs args = {}) {
    return {std::move(id), std::move(tool), std::move(args)};
}

// Full byte-level snapshot of a directory tree.
std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (auto it = std::filesystem::recursive_directory_iterator(root);
         it != std::filesystem::recursive_directory_iterator(); ++it) {
        auto rel = std::filesystem::relative(it->path(), root).string();
        if (it->is_regular_file())
            out[rel] = testutil::read_file(it->path());
        else if (it->is_directory())
            out[rel] = "<dir>";
    }
    return out;
}

// Straight-line restatement of the closure conditions (shared with nothing in
// the checker implementation).
bool closure_oracle(const std::set<std::string>& spec, const artifacts::TestReport& report,
                    const std::set<std::string>& bugs) {
    for (const auto& tc : report.cases)
        for (const auto& m : tc.marks)
            if (!spec.count(m))
                return false;
    std::set<std::string> exercised;
    for (const auto& tc : report.cases)
        if (tc.status != artifacts::TestStatus::Skip)
            exercised.insert(tc.marks.begin(), tc.marks.end());
    for (const auto& p : spec)
        if (!exercised.count(p))
            return false;
    for (const auto& tc : report.cases)
        if (tc.status == artifacts::TestStatus::Fail)
            for (const auto& m : tc.marks)
                if (!bugs.count(m))
                    return false;
    return true;
}

artifacts::SpecDocument spec_from_paths(const labels::PathSet& paths) {
    labels::LabelTree tree;
    for (const auto& p : paths) {
        auto git = std::find_if(tree.groups.begin(), tree.groups.end(),
                                [&](const auto& g) { return g.name == p.fg; });
        if (git == tree.groups.end()) {
            tree.groups.push_back({p.fg, {}});
            git = tree.groups.end() - 1;
        }
        auto cit = std::find_if(git->checkpoints.begin(), git->checkpoints.end(),
                                [&](const auto& c) { return c.name == p.fc; });
        if (cit == git->checkpoints.end()) {
            git->checkpoints.push_back({p.fc, {}});
            cit = git->checkpoints.end() - 1;
        }
        if (std::find(cit->checks.begin(), cit->checks.end(), p.ck) == cit->checks.end())
            cit->checks.push_back(p.ck);
    }
    return artifacts::parse_spec_text(labels::to_annotated_text(tree), "generated");
}

} // namespace

TEST_CASE("1 vclm-closure-positive-path") {
    // The golden scripted trace drives the full default workflow (>=1 FG,
    // >=2 FC, >=5 CK fixture) to its terminal state with every check point
    // exercised and an empty consistency diff, in under 60 seconds.
    auto started = std::chrono::steady_clock::now();

    TempDir dir("c1");
    scaffold::init_workspace(dir.path(), false);
    auto config = workflow::load_config(dir / "workflow.yaml");
    REQUIRE(config.flattened().size() == 31);

    auto spec = artifacts::parse_spec_text(scaffold::annotated_spec_text(), "fixture");
    REQUIRE(spec.tree.group_count() >= 1);
    REQUIRE(spec.tree.checkpoint_count() >= 2);
    REQUIRE(spec.tree.check_count() >= 5);

    auto engine = workflow::Engine::start_new(config, dir.path(), dir / ".veristage/state.json");
    gateway::Session session(engine);
    auto trace = gateway::load_trace(dir / "traces/golden.json");
    gateway::replay(trace, session);
    REQUIRE(engine.finished());

    auto closure = report::compute_closure_summary(config, dir.path());
    REQUIRE(closure.has_spec);
    REQUIRE(closure.has_coverage);
    REQUIRE(closure.has_report);
    CHECK(closure.total_paths == 6);
    CHECK(closure.exercised == closure.total_paths); // 100% of CK paths
    CHECK(closure.missing_paths.empty());
    CHECK(closure.extra_paths.empty());
    CHECK(closure.untraced_paths.empty());

    auto elapsed = std::chrono::steady_clock::now() - started;
    CHECK(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count() < 60);
}

TEST_CASE("2 renamed-check-reproduction") {
    // Coverage renames CK-OVERRUN to CK-OVERFLOW and invents CK-UNDERRUN:
    // exactly one omission and two extras, with exact paths; repair passes.
    TempDir dir("c2");
    auto spec = artifacts::parse_spec_text(
        "<FG-FIFO>\n<FC-ERROR>\n<CK-OVERRUN>\n<CK-FULL>\n", "spec.md");
    write_file(dir / "cov.txt", "<FG-FIFO> <FC-ERROR> <CK-OVERFLOW> <CK-UNDERRUN> <CK-FULL>\n");
    auto cov = artifacts::parse_coverage_model({dir / "cov.txt"}, spec.tree);
    auto result = checkers::check_coverage_consistency(spec, cov);
    REQUIRE_FALSE(result.passed);

    std::vector<std::string> omissions, extras;
    for (const auto& m : result.messages) {
        if (m.text.rfind("omission: ", 0) == 0)
            omissions.push_back(m.text.substr(10));
        if (m.text.rfind("hallucination or naming mistake: ", 0) == 0)
            extras.push_back(m.text.substr(33));
    }
    CHECK(omissions == std::vector<std::string>{"FG-FIFO/FC-ERROR/CK-OVERRUN"});
    CHECK(extras == std::vector<std::string>{"FG-FIFO/FC-ERROR/CK-OVERFLOW",
                                             "FG-FIFO/FC-ERROR/CK-UNDERRUN"});

    write_file(dir / "cov.txt", "<FG-FIFO> <FC-ERROR> <CK-OVERRUN> <CK-FULL>\n");
    auto repaired = artifacts::parse_coverage_model({dir / "cov.txt"}, spec.tree);
    CHECK(checkers::check_coverage_consistency(spec, repaired).passed);
}

TEST_CASE("3 three-condition-oracle-equivalence") {
    // check_test_report_closure agrees with the brute-force restatement of
    // the three conditions on >=1000 randomized spec/report/bug triples.
    testutil::Rng rng(0xC0FFEE);
    const std::vector<std::string> pool = {"A", "B", "C"};
    auto pick = [&] { return pool[rng() % pool.size()]; };

    int checked = 0;
    for (int iter = 0; iter < 1200; ++iter) {
        labels::PathSet universe;
        while (universe.size() < 6)
            universe.insert({pick(), pick(), pick()});
        labels::PathSet spec_paths, bug_paths;
        std::vector<std::string> universe_strings;
        for (const auto& p : universe) {
            if (rng() % 2)
                spec_paths.insert(p);
            if (rng() % 3 == 0)
                bug_paths.insert(p);
            universe_strings.push_back(p.path());
        }
        artifacts::TestReport report;
        std::size_t ncases = rng() % 5;
        for (std::size_t i = 0; i < ncases; ++i) {
            artifacts::TestCase tc;
            tc.name = "t" + std::to_string(i);
            tc.status = static_cast<artifacts::TestStatus>(rng() % 3);
            std::size_t nmarks = rng() % 4;
            for (std::size_t m = 0; m < nmarks; ++m)
                tc.marks.insert(universe_strings[rng() % universe_strings.size()]);
            report.cases.push_back(std::move(tc));
        }
        auto spec = spec_from_paths(spec_paths);
        REQUIRE(labels::flatten(spec.tree) == spec_paths);

        artifacts::BugDocument bugs;
        bugs.referenced = bug_paths;
        std::set<std::string> spec_strings, bug_strings;
        for (const auto& p : spec_paths)
            spec_strings.insert(p.path());
        for (const auto& p : bug_paths)
            bug_strings.insert(p.path());

        auto verdict = checkers::check_test_report_closure(spec, report, bugs);
        bool expected = closure_oracle(spec_strings, report, bug_strings);
        REQUIRE_MESSAGE(verdict.passed == expected, "instance " << iter << " diverged");
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("4 diff-algebra") {
    // diff(A,A) is empty, missing(A,B)==extra(B,A), and both sides agree with
    // naive set subtraction on >=1000 random pairs.
    testutil::Rng rng(424242);
    int checked = 0;
    for (int iter = 0; iter < 1200; ++iter) {
        auto a = testutil::random_path_set(rng, 12);
        auto b = testutil::random_path_set(rng, 12);
        auto self = labels::diff_bidirectional(a, a);
        REQUIRE(self.missing.empty());
        REQUIRE(self.extra.empty());

        auto d = labels::diff_bidirectional(a, b);
        auto r = labels::diff_bidirectional(b, a);
        REQUIRE(d.missing == testutil::naive_subtract(a, b));
        REQUIRE(d.extra == testutil::naive_subtract(b, a));
        REQUIRE(d.missing == r.extra);
        REQUIRE(d.extra == r.missing);
        ++checked;
    }
    CHECK(checked >= 1000);
}

TEST_CASE("5 gating-soundness") {
    // Exhaustive enumeration of every tool-call sequence of length <= 6 over
    // a 3-stage fixture: the stage index never advances except through a
    // Complete whose checkers pass, matching an independent file model.
    TempDir dir("c5");
    auto config = three_stage_config(dir);
    const std::array<const char*, 3> outputs = {"w0", "w1", "w2"};

    // action 0..2: write file i; 3: Check; 4: Complete
    constexpr int kActions = 5;
    constexpr int kMaxLen = 6;
    std::size_t sequences = 0;

    std::vector<int> seq;
    auto run_sequence = [&](const std::vector<int>& actions) {
        for (const auto& f : outputs)
            std::filesystem::remove(dir / f);
        std::filesystem::remove(dir / "state.json");
        auto engine = workflow::Engine::start_new(config, dir.path(), dir / "state.json");
        gateway::Session session(engine);

        bool file_model[3] = {false, false, false};
        std::size_t model_index = 0;
        int n = 0;
        for (int action : actions) {
            std::string id = "a" + std::to_string(n++);
            if (action < 3) {
                session.dispatch(req(id, "WriteArtifact",
                                     {{"path", std::string(outputs[action])},
                                      {"content", std::string("x")}}));
                file_model[action] = true;
            } else if (action == 3) {
                session.dispatch(req(id, "Check"));
            } else {
                session.dispatch(req(id, "Complete"));
                if (model_index < 3 && file_model[model_index])
                    ++model_index; // the only legal advance
            }
            REQUIRE(engine.state().current_index == model_index);
        }
    };

    // iterate all 5^1 + ... + 5^6 sequences
    for (int len = 1; len <= kMaxLen; ++len) {
        std::vector<int> actions(static_cast<std::size_t>(len), 0);
        while (true) {
            run_sequence(actions);
            ++sequences;
            int pos = len - 1;
            while (pos >= 0 && actions[static_cast<std::size_t>(pos)] == kActions - 1) {
                actions[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0)
                break;
            ++actions[static_cast<std::size_t>(pos)];
        }
    }
    CHECK(sequences == 19530); // 5 + 25 + ... + 5^6
}

TEST_CASE("6 resume-equivalence") {
    // Killing after each persisted transition of the golden run and resuming
    // reproduces the uninterrupted final state, modulo timestamps/elapsed.
    TempDir base("c6-base");
    scaffold::init_workspace(base.path(), false);
    auto config = workflow::load_config(base / "workflow.yaml");
    auto trace = gateway::load_trace(base / "traces/golden.json");

    json uninterrupted;
    std::vector<std::size_t> transition_points;
    {
        auto engine =
            workflow::Engine::start_new(config, base.path(), base / ".veristage/state.json");
        gateway::Session session(engine);
        auto result = gateway::replay(trace, session);
        REQUIRE(engine.finished());
        uninterrupted = normalized_state(base / ".veristage/state.json");
        for (std::size_t i = 0; i < result.responses.size(); ++i) {
            auto c = json::parse(result.responses[i].content_json, nullptr, false);
            if (!c.is_discarded() && c.is_object() && c.value("advanced", false))
                transition_points.push_back(i);
        }
    }
    REQUIRE(transition_points.size() >= 20);

    for (std::size_t kill_after : transition_points) {
        TempDir dir("c6-kill");
        scaffold::init_workspace(dir.path(), false);
        auto cfg = workflow::load_config(dir / "workflow.yaml");
        {
            auto engine =
                workflow::Engine::start_new(cfg, dir.path(), dir / ".veristage/state.json");
            gateway::Session session(engine);
            gateway::replay(trace, session, 0, kill_after + 1);
        } // "kill": the engine is gone; only the persisted state survives
        {
            auto engine =
                workflow::Engine::resume(cfg, dir.path(), dir / ".veristage/state.json");
            gateway::Session session(engine);
            gateway::replay(trace, session, kill_after + 1, trace.steps.size());
            REQUIRE(engine.finished());
        }
        REQUIRE_MESSAGE(normalized_state(dir / ".veristage/state.json") == uninterrupted,
                        "kill point after request " << kill_after << " diverged");
    }
}

TEST_CASE("7 telemetry-conservation") {
    // Per-stage failures sum to the count of failed Check/Complete responses,
    // and phase totals equal the sum of their member stages, for the golden
    // trace and for randomized traces.
    auto verify_conservation = [](const workflow::WorkflowConfig& config,
                                  const workflow::WorkflowState& state,
                                  std::size_t failed_checks) {
        auto report = workflow::telemetry_report(config, state);
        REQUIRE(report.total_failures == failed_checks);
        std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> by_phase;
        for (const auto& row : report.rows) {
            by_phase[row.phase].first += row.attempts;
            by_phase[row.phase].second += row.failures;
        }
        for (const auto& phase : report.phases) {
            REQUIRE(phase.attempts == by_phase[phase.phase].first);
            REQUIRE(phase.failures == by_phase[phase.phase].second);
        }
        std::uint64_t phase_attempts = 0, phase_failures = 0;
        for (const auto& phase : report.phases) {
            phase_attempts += phase.attempts;
            phase_failures += phase.failures;
        }
        REQUIRE(phase_attempts == report.total_attempts);
        REQUIRE(phase_failures == report.total_failures);
    };

    {
        TempDir dir("c7-golden");
        scaffold::init_workspace(dir.path(), false);
        auto config = workflow::load_config(dir / "workflow.yaml");
        auto engine =
            workflow::Engine::start_new(config, dir.path(), dir / ".veristage/state.json");
        gateway::Session session(engine);
        auto result = gateway::replay(gateway::load_trace(dir / "traces/golden.json"), session);
        CHECK(result.failed_checks == 2);
        verify_conservation(config, engine.state(), result.failed_checks);
    }

    testutil::Rng rng(777);
    for (int iter = 0; iter < 25; ++iter) {
        TempDir dir("c7-rand");
        auto config = three_stage_config(dir);
        auto engine = workflow::Engine::start_new(config, dir.path(), dir / "state.json");
        gateway::Session session(engine);
        gateway::ScriptedTrace trace;
        std::size_t len = 10 + rng() % 30;
        for (std::size_t i = 0; i < len; ++i) {
            switch (rng() % 5) {
            case 0:
                trace.steps.push_back({req("r" + std::to_string(i), "GetCurrentTips"), {}});
                break;
            case 1:
                trace.steps.push_back({req("r" + std::to_string(i), "Status"), {}});
                break;
            case 2:
                trace.steps.push_back({req("r" + std::to_string(i), "Check"), {}});
                break;
            case 3:
                trace.steps.push_back(
                    {req("r" + std::to_string(i), "WriteArtifact",
                         {{"path", std::string("w") + std::to_string(rng() % 3)},
                          {"content", std::string("x")}}),
                     {}});
                break;
            case 4:
                trace.steps.push_back({req("r" + std::to_string(i), "Complete"), {}});
                break;
            }
        }
        auto result = gateway::replay(trace, session);
        verify_conservation(config, engine.state(), result.failed_checks);
    }
}

TEST_CASE("8 sandbox") {
    // An adversarial trace attempting path escapes and non-allowlisted
    // commands yields only PathEscape/NotAllowlisted responses and leaves the
    // workspace byte-identical.
    TempDir dir("c8");
    scaffold::init_workspace(dir.path(), false);
    auto config = workflow::load_config(dir / "workflow.yaml");
    auto engine = workflow::Engine::start_new(config, dir.path(), dir / ".veristage/state.json");
    gateway::Session session(engine);

    auto outside_before = snapshot_tree(dir.path().parent_path());
    auto before = snapshot_tree(dir.path());

    gateway::ScriptedTrace trace;
    int n = 0;
    auto attack = [&](std::string tool, gateway::ToolArgs args) {
        trace.steps.push_back(
            {req("x" + std::to_string(n++), std::move(tool), std::move(args)),
             gateway::ToolStatus::Error});
    };
    attack("WriteArtifact", {{"path", std::string("../escape.txt")},
                             {"content", std::string("pwned")}});
    attack("WriteArtifact", {{"path", std::string("/tmp/escape-absolute.txt")},
                             {"content", std::string("pwned")}});
    attack("WriteArtifact", {{"path", std::string("docs/../../escape2.txt")},
                             {"content", std::string("pwned")}});
    attack("ReadArtifact", {{"path", std::string("../../etc/passwd")}});
    attack("ReadArtifact", {{"path", std::string("/etc/passwd")}});
    attack("RunTest", {{"command", std::string("rm")},
                       {"args", std::vector<std::string>{"-rf", "docs"}},
                       {"report_path", std::string("r.json")}});
    attack("RunTest", {{"command", std::string("sh")},
                       {"args", std::vector<std::string>{"-c", "echo pwned > owned.txt"}},
                       {"report_path", std::string("r.json")}});

    auto result = gateway::replay(trace, session);
    for (const auto& response : result.responses) {
        REQUIRE(response.status == gateway::ToolStatus::Error);
        auto c = json::parse(response.content_json);
        std::string kind = c.value("error_kind", "");
        REQUIRE((kind == "PathEscape" || kind == "NotAllowlisted"));
    }

    CHECK(snapshot_tree(dir.path()) == before);
    CHECK(snapshot_tree(dir.path().parent_path()) == outside_before);
}

TEST_CASE("9 driver-replay-equivalence") {
    // llm_driver against a loopback mock endpoint emitting the golden trace
    // ends in the same state as replay() of that trace.
    TempDir replay_dir("c9-replay");
    scaffold::init_workspace(replay_dir.path(), false);
    {
        auto config = workflow::load_config(replay_dir / "workflow.yaml");
        auto engine = workflow::Engine::start_new(config, replay_dir.path(),
                                                  replay_dir / ".veristage/state.json");
        gateway::Session session(engine);
        gateway::replay(gateway::load_trace(replay_dir / "traces/golden.json"), session);
        REQUIRE(engine.finished());
    }

    TempDir driver_dir("c9-driver");
    scaffold::init_workspace(driver_dir.path(), false);
    {
        auto config = workflow::load_config(driver_dir / "workflow.yaml");
        auto engine = workflow::Engine::start_new(config, driver_dir.path(),
                                                  driver_dir / ".veristage/state.json");
        gateway::Session session(engine);
        auto trace = gateway::load_trace(driver_dir / "traces/golden.json");
        testutil::MockChatServer server(testutil::turns_from_trace(trace));
        gateway::LlmEndpoint endpoint;
        endpoint.base_url = server.base_url();
        endpoint.model = "mock";
        endpoint.step_budget = 500;
        auto result = gateway::llm_driver(endpoint, session);
        REQUIRE(result.status == gateway::DriverStatus::Finished);
        REQUIRE(engine.finished());
    }

    CHECK(normalized_state(replay_dir / ".veristage/state.json") ==
          normalized_state(driver_dir / ".veristage/state.json"));
}
