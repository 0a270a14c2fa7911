#include <random>
#include <string>

#include <benchmark/benchmark.h>

#include "veristage/labels.hpp"
#include "veristage/workflow.hpp"

using namespace veristage;

namespace {

// Synthetic annotated document with n_groups * 4 * 6 check points plus prose.
std::string synthetic_document(std::size_t n_groups) {
    std::string text;
    for (std::size_t g = 0; g < n_groups; ++g) {
        text += "## <FG-GROUP" + std::to_string(g) + "> scenario category\n";
        for (int c = 0; c < 4; ++c) {
            text += "### <FC-POINT" + std::to_string(c) + "> feature under test\n";
            for (int k = 0; k < 6; ++k)
                text += "- <CK-CASE" + std::to_string(k) +
                        "> one verifiable condition with some prose around it\n";
        }
    }
    return text;
}

labels::PathSet random_paths(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    labels::PathSet out;
    while (out.size() < n)
        out.insert({"G" + std::to_string(rng() % 50), "C" + std::to_string(rng() % 50),
                    "K" + std::to_string(rng() % 200)});
    return out;
}

void BM_LexLabels(benchmark::State& state) {
    auto text = synthetic_document(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto res = labels::lex_labels(text);
        benchmark::DoNotOptimize(res.labels.size());
    }
    state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_LexLabels)->Arg(4)->Arg(64)->Arg(512);

void BM_BuildAndFlatten(benchmark::State& state) {
    auto text = synthetic_document(static_cast<std::size_t>(state.range(0)));
    auto lexed = labels::lex_labels(text);
    for (auto _ : state) {
        auto tree = labels::build_tree(lexed.labels);
        benchmark::DoNotOptimize(labels::flatten(tree.tree).size());
    }
}
BENCHMARK(BM_BuildAndFlatten)->Arg(4)->Arg(64);

void BM_DiffBidirectional(benchmark::State& state) {
    auto n = static_cast<std::size_t>(state.range(0));
    auto reference = random_paths(n, 1);
    auto candidate = random_paths(n, 2);
    for (auto _ : state) {
        auto diff = labels::diff_bidirectional(reference, candidate);
        benchmark::DoNotOptimize(diff.missing.size());
    }
}
BENCHMARK(BM_DiffBidirectional)->Arg(100)->Arg(1000)->Arg(10000);

void BM_QualifiedPathParse(benchmark::State& state) {
    const std::string path = "FG-ARITHMETIC/FC-VFADD/CK-FP32";
    for (auto _ : state)
        benchmark::DoNotOptimize(labels::parse_qualified_path(path));
}
BENCHMARK(BM_QualifiedPathParse);

} // namespace

BENCHMARK_MAIN();
