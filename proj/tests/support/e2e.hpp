#pragma once

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "stagefix/cli.hpp"

namespace testing_support {

namespace fs = std::filesystem;

struct CliResult {
    int status = 0;
    std::string out;
    std::string err;
};

inline CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "stagefix");
    std::ostringstream out, err;
    CliResult r;
    r.status = stagefix::cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

inline fs::path e2e_fixture() { return fs::path(STAGEFIX_E2E_FIXTURE); }

inline fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("stagefix_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ingest, context and index over the committed fixture. Returns the first
// failing result, or the last one.
inline CliResult prepare_e2e(const fs::path& work) {
    const auto fx = e2e_fixture();
    const std::string w = work.string();
    const std::vector<std::vector<std::string>> steps = {
        {"ingest", "--corpus", (fx / "raw.jsonl").string(), "--seed", "7", "--out", w + "/split"},
        {"context", "--corpus", w + "/split/test.jsonl", "--sources", (fx / "sources").string(), "--out",
         w + "/test.jsonl"},
        {"context", "--corpus", w + "/split/train.jsonl", "--sources", (fx / "sources").string(), "--out",
         w + "/train.jsonl"},
        {"index", "--corpus", w + "/train.jsonl", "--out", w + "/index"},
    };
    CliResult r;
    for (const auto& s : steps) {
        r = cli(s);
        if (r.status != 0) return r;
    }
    return r;
}

inline CliResult replay_e2e(const fs::path& work, int k, const fs::path& out, int workers = 2) {
    const std::string w = work.string();
    return cli({"run", "--corpus", w + "/test.jsonl", "--train", w + "/train.jsonl", "--index", w + "/index",
                "--backend", "replay", "--transcripts", (e2e_fixture() / "transcripts").string(), "--k",
                std::to_string(k), "--workers", std::to_string(workers), "--out", out.string()});
}

}  // namespace testing_support
