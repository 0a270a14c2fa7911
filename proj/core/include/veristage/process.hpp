#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace veristage::proc {

struct ProcessResult {
    int exit_code = -1; // 128+signal when killed by a signal
    bool timed_out = false;
    std::string output; // combined stdout+stderr, capped to the tail
};

/// Runs argv[0] with the given arguments in `cwd`, capturing combined output.
/// The child runs in its own process group; on timeout the whole group is
/// killed. Only the last `output_tail_bytes` of output are kept.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd, double timeout_s,
                          std::size_t output_tail_bytes = 4096);

} // namespace veristage::proc
