#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "e2e.hpp"
#include "stagefix/corpus.hpp"

using namespace testing_support;
using json = nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
    return out;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

// Prepared once; the steps are checked individually below.
const fs::path& prepared() {
    static const fs::path work = [] {
        auto w = fresh_dir("cli_prepared");
        REQUIRE(prepare_e2e(w).status == 0);
        return w;
    }();
    return work;
}

}  // namespace

TEST_CASE("ingest filters and splits by repository") {
    const auto work = fresh_dir("cli_ingest");
    const auto r = cli({"ingest", "--corpus", (e2e_fixture() / "raw.jsonl").string(), "--seed", "7", "--out",
                        work.string()});
    REQUIRE(r.status == 0);
    CHECK(contains(r.out, "loaded 39, kept 37"));
    const auto train = stagefix::load_corpus(work / "train.jsonl");
    const auto test = stagefix::load_corpus(work / "test.jsonl");
    CHECK(train.size() + test.size() == 37);
    for (const auto& t : test) {
        for (const auto& u : train) CHECK(t.repo != u.repo);
    }
    const auto split = json::parse(slurp(work / "split.json"));
    CHECK(split["seed"] == 7);
    CHECK(split["test_repos"].size() + split["train_repos"].size() == 6);
}

TEST_CASE("ingest reports the offending line") {
    const auto work = fresh_dir("cli_ingest_bad");
    const auto raw = stagefix::load_corpus(e2e_fixture() / "raw.jsonl");
    std::string text;
    for (int i = 0; i < 4; ++i) text += json(raw[i]).dump() + "\n";
    text += R"({"id": "broken", "repo": "x"})" "\n";
    std::ofstream(work / "raw.jsonl") << text;
    const auto r = cli({"ingest", "--corpus", (work / "raw.jsonl").string(), "--out", (work / "out").string()});
    CHECK(r.status == 1);
    CHECK(contains(r.err, "line 5"));
    CHECK(contains(r.err, "MissingField"));
}

TEST_CASE("context attaches extracted context and warns on gaps") {
    const auto work = prepared();
    for (const auto& inst : stagefix::load_corpus(work / "test.jsonl")) {
        REQUIRE(inst.context);
        CHECK(inst.context->class_imports == std::vector<std::string>{"import io.parse.util.Helper;"});
    }
    const auto cost = stagefix::load_corpus(work / "test.jsonl")[3];
    REQUIRE(cost.id == "parser-4");
    REQUIRE(cost.context->repo_signatures.size() == 1);
    CHECK(cost.context->repo_signatures[0].text == "public static int round(int v)");

    SUBCASE("missing tree leaves every context absent") {
        const auto out = fresh_dir("cli_ctx_missing") / "c.jsonl";
        const auto r = cli({"context", "--corpus", (work / "test.jsonl").string(), "--sources", "/nonexistent/tree",
                            "--out", out.string()});
        CHECK(r.status == 0);
        CHECK(contains(r.err, "warning: source tree"));
        for (const auto& inst : stagefix::load_corpus(out)) CHECK_FALSE(inst.context);
    }
    SUBCASE("a method that is not in the tree is skipped with a warning") {
        const auto dir = fresh_dir("cli_ctx_gap");
        auto corpus = stagefix::load_corpus(work / "test.jsonl");
        corpus[0].buggy_method = "int nowhere() { return a.length - 1; }";
        corpus[0].buggy_hunk = "return a.length - 1;";
        stagefix::save_corpus(dir / "in.jsonl", corpus);
        const auto r = cli({"context", "--corpus", (dir / "in.jsonl").string(), "--sources",
                            (e2e_fixture() / "sources").string(), "--out", (dir / "out.jsonl").string()});
        CHECK(r.status == 0);
        CHECK(contains(r.err, "warning: parser-1: buggy method not found"));
        const auto out = stagefix::load_corpus(dir / "out.jsonl");
        CHECK_FALSE(out[0].context);
        CHECK(out[1].context);
    }
}

TEST_CASE("index and retrieve") {
    const auto work = prepared();
    for (const char* f : {"buggy_method", "buggy_hunk", "commit_message"}) {
        CHECK(fs::exists(work / "index" / (std::string(f) + ".json")));
    }
    const auto r = cli({"retrieve", "--corpus", (work / "test.jsonl").string(), "--train",
                        (work / "train.jsonl").string(), "--index", (work / "index").string()});
    REQUIRE(r.status == 0);
    const auto demos = json::parse(r.out);
    CHECK(demos.size() == 6);
    CHECK(demos["parser-1"].empty());
    REQUIRE(demos["parser-5"].size() == 1);
    CHECK(demos["parser-5"][0]["source_id"] == "geometry-5");
    CHECK(demos["parser-5"][0]["facet"] == "commit_message");
}

TEST_CASE("replay runs are byte-identical and k controls the run count") {
    const auto work = prepared();
    const auto a = fresh_dir("cli_run_a");
    const auto b = fresh_dir("cli_run_b");
    const auto ra = replay_e2e(work, 1, a, 1);
    REQUIRE(ra.status == 0);
    CHECK(contains(ra.out, "runs 6, verified 4, failed 0"));
    REQUIRE(replay_e2e(work, 1, b, 3).status == 0);
    const auto ma = dir_contents(a / "manifests");
    CHECK(ma.size() == 6);
    CHECK(ma == dir_contents(b / "manifests"));

    const auto t = json::parse(ma.at("parser-5__s0.json"));
    CHECK(t["demonstrations_used"] == json::array({"geometry-5"}));
    CHECK(t["stage_outputs"][3]["kind"] == "fix_patterns");

    const auto c = fresh_dir("cli_run_k3");
    const auto rc = replay_e2e(work, 3, c);
    REQUIRE(rc.status == 0);
    CHECK(dir_contents(c / "manifests").size() == 18);
    CHECK(fs::exists(c / "manifests" / "parser-6__s2.json"));
}

TEST_CASE("run options may come from a config file") {
    const auto work = prepared();
    const auto dir = fresh_dir("cli_config");
    std::ofstream(dir / "cfg.json") << json{{"k", 3},
                                            {"workers", 1},
                                            {"backend", "replay"},
                                            {"transcripts", (e2e_fixture() / "transcripts").string()},
                                            {"train", (work / "train.jsonl").string()},
                                            {"index", (work / "index").string()}}
                                           .dump();
    const auto r = cli({"run", "--config", (dir / "cfg.json").string(), "--corpus", (work / "test.jsonl").string(),
                        "--out", (dir / "out").string()});
    REQUIRE(r.status == 0);
    CHECK(contains(r.out, "runs 18,"));
    // flags win over the file
    const auto r1 = cli({"run", "--config", (dir / "cfg.json").string(), "--k", "1", "--corpus",
                         (work / "test.jsonl").string(), "--out", (dir / "out1").string()});
    REQUIRE(r1.status == 0);
    CHECK(contains(r1.out, "runs 6,"));
}

TEST_CASE("configuration errors exit with status 2") {
    const auto work = prepared();
    ::unsetenv("OPENAI_API_KEY");
    const auto live = cli({"run", "--corpus", (work / "test.jsonl").string(), "--backend", "live", "--endpoint",
                           "http://127.0.0.1:9/v1/chat/completions", "--out", fresh_dir("cli_live").string()});
    CHECK(live.status == 2);
    CHECK(contains(live.err, "OPENAI_API_KEY"));

    const auto no_transcripts =
        cli({"run", "--corpus", (work / "test.jsonl").string(), "--out", fresh_dir("cli_replay").string()});
    CHECK(no_transcripts.status == 2);

    CHECK(cli({"frobnicate"}).status == 2);
    CHECK(cli({"run", "--no-such-flag"}).status == 2);
    CHECK(cli({"--help"}).status == 0);
    CHECK(cli({"eval", "--corpus", (work / "test.jsonl").string(), "--manifests", "/nonexistent", "--out", "x"})
              .status == 2);
}

TEST_CASE("eval scores manifests and compares models") {
    const auto work = prepared();
    const auto greedy = fresh_dir("cli_eval_greedy");
    const auto sampled = fresh_dir("cli_eval_sampled");
    REQUIRE(replay_e2e(work, 1, greedy).status == 0);
    REQUIRE(replay_e2e(work, 3, sampled).status == 0);

    const auto out = fresh_dir("cli_eval_out");
    const auto r = cli({"eval", "--corpus", (work / "test.jsonl").string(), "--manifests", "greedy=" + greedy.string(),
                        "--manifests", "sampled=" + sampled.string(), "--k", "1", "--k", "3", "--out", out.string()});
    REQUIRE(r.status == 0);
    const auto report = json::parse(slurp(out / "report.json"));
    CHECK(report["models"]["greedy"]["fix_at_k"]["1"] == 66.67);
    CHECK(report["models"]["sampled"]["fix_at_k"]["3"] == 100.0);
    CHECK(report["overlap"]["models"] == json::array({"greedy", "sampled"}));
    CHECK(report["t_tests"].contains("greedy vs sampled"));

    const auto md = cli({"report", "--report", (out / "report.json").string()});
    REQUIRE(md.status == 0);
    CHECK(md.out == slurp(out / "report.md"));

    SUBCASE("missing manifests count as unresolved") {
        fs::remove(greedy / "manifests" / "parser-1__s0.json");
        const auto out2 = fresh_dir("cli_eval_missing");
        const auto r2 = cli({"eval", "--corpus", (work / "test.jsonl").string(), "--manifests", greedy.string(),
                             "--k", "1", "--out", out2.string()});
        REQUIRE(r2.status == 0);
        CHECK(contains(r2.err, "no manifest for parser-1; counted unresolved"));
        const auto j = json::parse(slurp(out2 / "report.json"));
        CHECK(j["models"]["stagefix"]["fix_at_k"]["1"] == 50.0);
    }
}

TEST_CASE("the whole chain yields byte-identical reports") {
    auto chain = [](const std::string& tag) {
        const auto work = fresh_dir("cli_chain_" + tag);
        REQUIRE(prepare_e2e(work).status == 0);
        REQUIRE(replay_e2e(work, 1, work / "run").status == 0);
        REQUIRE(cli({"eval", "--corpus", (work / "test.jsonl").string(), "--manifests", (work / "run").string(),
                     "--out", (work / "eval").string()})
                    .status == 0);
        return slurp(work / "eval" / "report.json");
    };
    const auto first = chain("a");
    CHECK_FALSE(first.empty());
    CHECK(first == chain("b"));
}
