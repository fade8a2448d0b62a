// Regenerates the recorded transcripts under tests/fixtures/e2e/transcripts.
// The scripted model fixes an instance on the first try, on the second try,
// or never, cycling by instance position (shifted by sample index).
#include <array>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "e2e.hpp"
#include "stagefix/corpus.hpp"
#include "stagefix/eval.hpp"
#include "stagefix/llm.hpp"
#include "stagefix/pipeline.hpp"
#include "stagefix/retrieval.hpp"

using namespace stagefix;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class FixtureBackend : public Backend {
  public:
    FixtureBackend(const BugInstance& inst, int mode, int patch_budget) : inst_(inst), mode_(mode), patch_budget_(patch_budget) {
        for (const auto& t : hunk_pair(inst).second) correct_ += (correct_.empty() ? "" : " ") + t;
    }

    ChatResponse complete(const ChatRequest& r, std::size_t) override {
        std::string text;
        switch (r.agent_role) {
            case AgentRole::Tester:
                text = "The statement `" + inst_.buggy_hunk + "` produces the wrong value at a boundary.";
                break;
            case AgentRole::Developer:
                if (r.max_tokens == patch_budget_) {
                    const bool right = mode_ == 0 || (mode_ == 1 && patches_ > 0);
                    ++patches_;
                    last_right_ = right;
                    text = "```java\n" + (right ? correct_ : inst_.buggy_hunk) + "\n```";
                } else {
                    text = "Note " + std::to_string(++notes_) + " on " + inst_.id + ".";
                }
                break;
            case AgentRole::Reviewer:
                text = last_right_ ? "VERDICT: PASS\nMatches the intent." : "VERDICT: FAIL\nThe boundary is still wrong.";
                break;
        }
        return {text, TokenUsage{0, 0}, "fixture"};
    }

  private:
    const BugInstance& inst_;
    int mode_;
    int patch_budget_;
    std::string correct_;
    int patches_ = 0;
    int notes_ = 0;
    bool last_right_ = false;
};

}  // namespace

int main(int argc, char** argv) {
    const fs::path out_dir = argc > 1 ? fs::path(argv[1]) : testing_support::e2e_fixture() / "transcripts";
    const auto work = testing_support::fresh_dir("make_fixture");
    const auto prep = testing_support::prepare_e2e(work);
    if (prep.status != 0) {
        std::cerr << prep.err;
        return 1;
    }
    const auto targets = load_corpus(work / "test.jsonl");
    std::array<Bm25Index, 3> indexes;
    for (std::size_t f = 0; f < 3; ++f) {
        std::ifstream in(work / "index" / (std::string(to_string(kFacetOrder[f])) + ".json"));
        indexes[f] = Bm25Index::from_json(json::parse(in));
    }
    const DemonstrationPool pool(load_corpus(work / "train.jsonl"), indexes);
    const PipelineConfig cfg;

    TranscriptStore all;
    auto record = [&](std::size_t i, Sampling s) {
        auto inner = std::make_shared<FixtureBackend>(targets[i], static_cast<int>((i + s.sample_index) % 3),
                                                      cfg.patch_max_tokens);
        RecordingBackend rec(inner);
        run_pipeline(targets[i], pool.retrieve(targets[i]), rec, cfg, s);
        const auto snap = rec.snapshot();
        for (const auto& e : snap.entries()) all.add(e);
    };
    for (std::size_t i = 0; i < targets.size(); ++i) {
        record(i, Sampling{cfg.temperature_greedy, 0});
        for (std::size_t j = 0; j < 3; ++j) record(i, Sampling{cfg.temperature_sampling, j});
    }
    fs::create_directories(out_dir);
    all.save(out_dir / "pipeline.jsonl");
    std::cout << "wrote " << all.size() << " entries for " << targets.size() << " targets\n";
    fs::remove_all(work);
    return 0;
}
