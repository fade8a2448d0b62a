#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stagefix/corpus.hpp"
#include "stagefix/llm.hpp"
#include "stagefix/retrieval.hpp"
#include "stagefix/templates.hpp"

namespace stagefix {

/// Iteration cap, per-stage token budgets and decoding temperatures.
struct PipelineConfig {
    int max_iter_num = 3;
    int report_max_tokens = 200;
    int explain_max_tokens = 500;
    int pattern_max_tokens = 500;
    int patch_max_tokens = 150;
    int review_max_tokens = 200;
    double temperature_greedy = 0.0;
    double temperature_sampling = 0.8;
    std::string model_name = "gpt-3.5-turbo-0125";
    PromptTemplates templates = PromptTemplates::defaults();

    /// Throws std::invalid_argument when a budget or the cap is out of range.
    void validate() const;
};

enum class StageKind { BugReport, MethodSummary, CodeExplanation, FixPatterns, CandidatePatch, ReviewFeedback };

const char* to_string(StageKind kind);
StageKind stage_kind_from_string(const std::string& name);

struct StageOutput {
    StageKind kind = StageKind::BugReport;
    std::string text;
    std::size_t stage_index = 0;
    std::string prompt;

    friend bool operator==(const StageOutput&, const StageOutput&) = default;
};

/// Functionality requirement plus programmer intent.
struct FixingGoal {
    std::string method_summary;
    std::string commit_message;
};

struct ReviewVerdict {
    bool passed = false;
    std::string feedback;
};

/// Outputs of earlier stages handed to patch generation.
struct FeedbackBundle {
    std::string bug_report;
    std::string code_explanation;
    std::optional<std::string> fix_patterns;
    /// Set in iteration mode only.
    std::optional<std::string> previous_patch;
    std::optional<std::string> review_feedback;
};

struct RunTranscript {
    std::string instance_id;
    std::size_t sample_index = 0;
    double temperature = 0.0;
    std::vector<StageOutput> stage_outputs;
    int iterations_used = 0;
    bool verified = false;
    std::string final_patch;
    std::vector<std::string> demonstrations_used;
    std::optional<std::string> error;

    friend bool operator==(const RunTranscript&, const RunTranscript&) = default;
};

void to_json(nlohmann::json& j, const StageOutput& s);
void from_json(const nlohmann::json& j, StageOutput& s);
void to_json(nlohmann::json& j, const RunTranscript& t);
void from_json(const nlohmann::json& j, RunTranscript& t);

class EmptyPatch : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A stage failed; `partial` holds everything produced before the failure.
class PipelineError : public std::runtime_error {
  public:
    PipelineError(const std::string& what, RunTranscript partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    [[nodiscard]] const RunTranscript& partial() const noexcept { return partial_; }

  private:
    RunTranscript partial_;
};

/// Decoding parameters shared by every call of one pipeline run.
struct Sampling {
    double temperature = 0.0;
    std::size_t sample_index = 0;
};

/// Interior of the first fenced block, else the trimmed text. Leading and
/// trailing blank lines are dropped. Throws EmptyPatch on an empty result.
std::string extract_patch(const std::string& completion);

/// PASS only if a line reads `VERDICT: PASS` (case-insensitive, optional
/// markdown emphasis); a missing verdict line fails closed.
ReviewVerdict parse_verdict(const std::string& feedback);

/// Numbered [Buggy Method]/[Fixed Method] blocks.
std::string render_demonstrations(const std::vector<Demonstration>& demos);

StageOutput stage_report(const BugInstance& instance, Backend& backend, const PipelineConfig& cfg,
                         Sampling sampling = {});

struct Explanation {
    StageOutput method_summary;
    StageOutput code_explanation;
};
Explanation stage_explain(const BugInstance& instance, const std::string& bug_report, Backend& backend,
                          const PipelineConfig& cfg, Sampling sampling = {});

/// No call and no output when there are no demonstrations.
std::optional<StageOutput> stage_patterns(const std::vector<Demonstration>& demos, Backend& backend,
                                          const PipelineConfig& cfg, Sampling sampling = {});

StageOutput stage_generate(const BugInstance& instance, const FeedbackBundle& feedback, Backend& backend,
                           const PipelineConfig& cfg, Sampling sampling = {});

struct Verification {
    ReviewVerdict verdict;
    StageOutput output;
};
Verification stage_verify(const BugInstance& instance, const std::string& patch, const FixingGoal& goal,
                          Backend& backend, const PipelineConfig& cfg, Sampling sampling = {});

/// report -> summary -> explanation -> (patterns) -> patch -> review, then up
/// to max_iter_num rounds of regenerate + review until the reviewer passes
/// a patch. Without a pass the last candidate is returned unverified.
RunTranscript run_pipeline(const BugInstance& instance, const std::vector<Demonstration>& demos,
                           Backend& backend, const PipelineConfig& cfg, Sampling sampling = {});

}  // namespace stagefix
