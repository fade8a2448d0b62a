#include "stagefix/pipeline.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "stagefix/contextscan.hpp"
#include "stagefix/tokenize.hpp"

namespace stagefix {

using json = nlohmann::json;

void PipelineConfig::validate() const {
    if (max_iter_num < 0) throw std::invalid_argument("max_iter_num must be >= 0");
    for (int budget : {report_max_tokens, explain_max_tokens, pattern_max_tokens, patch_max_tokens, review_max_tokens}) {
        if (budget <= 0) throw std::invalid_argument("token budgets must be positive");
    }
    if (temperature_greedy < 0 || temperature_sampling < 0) throw std::invalid_argument("temperature must be >= 0");
}

const char* to_string(StageKind kind) {
    switch (kind) {
        case StageKind::BugReport: return "bug_report";
        case StageKind::MethodSummary: return "method_summary";
        case StageKind::CodeExplanation: return "code_explanation";
        case StageKind::FixPatterns: return "fix_patterns";
        case StageKind::CandidatePatch: return "candidate_patch";
        case StageKind::ReviewFeedback: return "review_feedback";
    }
    return "unknown";
}

StageKind stage_kind_from_string(const std::string& name) {
    for (auto k : {StageKind::BugReport, StageKind::MethodSummary, StageKind::CodeExplanation, StageKind::FixPatterns,
                   StageKind::CandidatePatch, StageKind::ReviewFeedback}) {
        if (name == to_string(k)) return k;
    }
    throw std::invalid_argument("unknown stage kind '" + name + "'");
}

void to_json(json& j, const StageOutput& s) {
    j = json{{"kind", to_string(s.kind)}, {"stage_index", s.stage_index}, {"text", s.text}, {"prompt", s.prompt}};
}

void from_json(const json& j, StageOutput& s) {
    s.kind = stage_kind_from_string(j.at("kind").get<std::string>());
    s.stage_index = j.at("stage_index").get<std::size_t>();
    s.text = j.at("text").get<std::string>();
    s.prompt = j.value("prompt", std::string{});
}

void to_json(json& j, const RunTranscript& t) {
    j = json{{"instance_id", t.instance_id},
             {"sample_index", t.sample_index},
             {"temperature", t.temperature},
             {"stage_outputs", t.stage_outputs},
             {"iterations_used", t.iterations_used},
             {"verified", t.verified},
             {"final_patch", t.final_patch},
             {"demonstrations_used", t.demonstrations_used}};
    j["error"] = t.error ? json(*t.error) : json(nullptr);
}

void from_json(const json& j, RunTranscript& t) {
    t.instance_id = j.at("instance_id").get<std::string>();
    t.sample_index = j.value("sample_index", std::size_t{0});
    t.temperature = j.value("temperature", 0.0);
    t.stage_outputs = j.at("stage_outputs").get<std::vector<StageOutput>>();
    t.iterations_used = j.at("iterations_used").get<int>();
    t.verified = j.at("verified").get<bool>();
    t.final_patch = j.at("final_patch").get<std::string>();
    t.demonstrations_used = j.value("demonstrations_used", std::vector<std::string>{});
    t.error.reset();
    if (auto it = j.find("error"); it != j.end() && it->is_string()) t.error = it->get<std::string>();
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Drops whitespace-only lines at both ends and trailing whitespace.
std::string strip_blank_lines(const std::string& s) {
    std::size_t begin = 0;
    for (;;) {
        const auto nl = s.find('\n', begin);
        if (nl == std::string::npos) break;
        if (s.find_first_not_of(" \t\r", begin) < nl) break;
        begin = nl + 1;
    }
    auto out = s.substr(begin);
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
    return out;
}

// Budget overruns are tolerated up to 10% and cut at a token boundary.
std::string clip(const std::string& text, int budget) {
    const auto b = static_cast<std::size_t>(budget);
    return truncate_tokens(text, b + b / 10);
}

std::string context_text(const BugInstance& inst) {
    return inst.context ? render_context(*inst.context) : std::string(kNoContextSentinel);
}

std::map<std::string, std::string> base_vars(const BugInstance& inst) {
    return {{"buggy_method", inst.buggy_method},
            {"buggy_hunk", inst.buggy_hunk},
            {"dependence_context", context_text(inst)},
            {"commit_message", inst.commit_message}};
}

StageOutput call(Backend& backend, const PipelineConfig& cfg, Sampling sampling, AgentRole role,
                 const std::string& system_section, const std::string& user_section, const std::string& task_section,
                 std::map<std::string, std::string> vars, int budget, StageKind kind) {
    vars["task_definition"] = cfg.templates.render(task_section, {});
    ChatRequest req;
    req.agent_role = role;
    req.system_instruction = cfg.templates.render(system_section, {});
    req.user_prompt = cfg.templates.render(user_section, vars);
    req.temperature = sampling.temperature;
    req.max_tokens = budget;
    req.model_name = cfg.model_name;
    auto resp = backend.complete(req, sampling.sample_index);
    return StageOutput{kind, clip(resp.text, budget), 0, req.user_prompt};
}

}  // namespace

std::string extract_patch(const std::string& completion) {
    std::string result;
    const auto fence = completion.find("```");
    if (fence != std::string::npos) {
        auto body_start = completion.find('\n', fence + 3);
        body_start = body_start == std::string::npos ? completion.size() : body_start + 1;
        auto body_end = completion.find("```", body_start);
        if (body_end == std::string::npos) body_end = completion.size();
        result = strip_blank_lines(completion.substr(body_start, body_end - body_start));
    } else {
        result = trim(completion);
    }
    if (trim(result).empty()) throw EmptyPatch("completion contains no patch text");
    return result;
}

ReviewVerdict parse_verdict(const std::string& feedback) {
    ReviewVerdict v{false, feedback};
    std::size_t pos = 0;
    while (pos <= feedback.size()) {
        auto nl = feedback.find('\n', pos);
        if (nl == std::string::npos) nl = feedback.size();
        std::string line;
        for (std::size_t i = pos; i < nl; ++i) line.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(feedback[i]))));
        pos = nl + 1;
        const auto b = line.find_first_not_of(" \t\r*#>_`");
        if (b == std::string::npos || line.compare(b, 7, "verdict") != 0) continue;
        auto rest = line.substr(b + 7);
        const auto colon = rest.find_first_not_of(" \t*_");
        if (colon == std::string::npos || rest[colon] != ':') continue;
        rest = rest.substr(colon + 1);
        const auto w = rest.find_first_not_of(" \t*_`");
        if (w == std::string::npos) continue;
        if (rest.compare(w, 4, "pass") == 0) {
            const auto after = w + 4;
            v.passed = after >= rest.size() || !std::isalnum(static_cast<unsigned char>(rest[after]));
        }
        return v;  // the first verdict line decides
    }
    return v;
}

std::string render_demonstrations(const std::vector<Demonstration>& demos) {
    std::string out;
    for (std::size_t i = 0; i < demos.size(); ++i) {
        if (i) out += "\n\n";
        out += "[Demonstration " + std::to_string(i + 1) + "]\n";
        out += "[Buggy Method]\n" + demos[i].buggy_method + "\n\n";
        out += "[Fixed Method]\n" + demos[i].fixed_method;
    }
    return out;
}

StageOutput stage_report(const BugInstance& instance, Backend& backend, const PipelineConfig& cfg, Sampling sampling) {
    return call(backend, cfg, sampling, AgentRole::Tester, "tester.system", "report.user", "report.task",
                base_vars(instance), cfg.report_max_tokens, StageKind::BugReport);
}

Explanation stage_explain(const BugInstance& instance, const std::string& bug_report, Backend& backend,
                          const PipelineConfig& cfg, Sampling sampling) {
    auto vars = base_vars(instance);
    vars["bug_report"] = bug_report;
    auto summary = call(backend, cfg, sampling, AgentRole::Developer, "developer.system", "summary.user",
                        "summary.task", vars, cfg.explain_max_tokens, StageKind::MethodSummary);
    vars["method_summary"] = summary.text;
    auto explanation = call(backend, cfg, sampling, AgentRole::Developer, "developer.system", "explanation.user",
                            "explanation.task", vars, cfg.explain_max_tokens, StageKind::CodeExplanation);
    return {std::move(summary), std::move(explanation)};
}

std::optional<StageOutput> stage_patterns(const std::vector<Demonstration>& demos, Backend& backend,
                                          const PipelineConfig& cfg, Sampling sampling) {
    if (demos.empty()) return std::nullopt;
    return call(backend, cfg, sampling, AgentRole::Developer, "developer.system", "patterns.user", "patterns.task",
                {{"demonstrations", render_demonstrations(demos)}}, cfg.pattern_max_tokens, StageKind::FixPatterns);
}

StageOutput stage_generate(const BugInstance& instance, const FeedbackBundle& feedback, Backend& backend,
                           const PipelineConfig& cfg, Sampling sampling) {
    auto vars = base_vars(instance);
    vars["bug_report"] = feedback.bug_report;
    vars["code_explanation"] = feedback.code_explanation;
    vars["fix_patterns"] = feedback.fix_patterns.value_or("");
    vars["candidate_patch"] = feedback.previous_patch.value_or("");
    vars["review_feedback"] = feedback.review_feedback.value_or("");
    auto out = call(backend, cfg, sampling, AgentRole::Developer, "developer.system", "patch.user", "patch.task",
                    std::move(vars), cfg.patch_max_tokens, StageKind::CandidatePatch);
    out.text = extract_patch(out.text);
    return out;
}

Verification stage_verify(const BugInstance& instance, const std::string& patch, const FixingGoal& goal,
                          Backend& backend, const PipelineConfig& cfg, Sampling sampling) {
    auto vars = base_vars(instance);
    vars["candidate_patch"] = patch;
    vars["method_summary"] = goal.method_summary;
    vars["commit_message"] = goal.commit_message;
    auto out = call(backend, cfg, sampling, AgentRole::Reviewer, "reviewer.system", "verify.user", "verify.task",
                    std::move(vars), cfg.review_max_tokens, StageKind::ReviewFeedback);
    return {parse_verdict(out.text), std::move(out)};
}

RunTranscript run_pipeline(const BugInstance& instance, const std::vector<Demonstration>& demos, Backend& backend,
                           const PipelineConfig& cfg, Sampling sampling) {
    cfg.validate();
    RunTranscript t;
    t.instance_id = instance.id;
    t.sample_index = sampling.sample_index;
    t.temperature = sampling.temperature;
    for (const auto& d : demos) t.demonstrations_used.push_back(d.source_id);

    auto push = [&](StageOutput s) -> const StageOutput& {
        s.stage_index = t.stage_outputs.size();
        t.stage_outputs.push_back(std::move(s));
        return t.stage_outputs.back();
    };

    try {
        const auto& report = push(stage_report(instance, backend, cfg, sampling));
        FeedbackBundle bundle;
        bundle.bug_report = report.text;

        auto explained = stage_explain(instance, bundle.bug_report, backend, cfg, sampling);
        const FixingGoal goal{explained.method_summary.text, instance.commit_message};
        bundle.code_explanation = explained.code_explanation.text;
        push(std::move(explained.method_summary));
        push(std::move(explained.code_explanation));

        if (auto patterns = stage_patterns(demos, backend, cfg, sampling)) {
            bundle.fix_patterns = patterns->text;
            push(std::move(*patterns));
        }

        std::string patch = push(stage_generate(instance, bundle, backend, cfg, sampling)).text;
        t.final_patch = patch;
        auto review = stage_verify(instance, patch, goal, backend, cfg, sampling);
        push(std::move(review.output));
        bool passed = review.verdict.passed;

        while (!passed && t.iterations_used < cfg.max_iter_num) {
            ++t.iterations_used;
            bundle.previous_patch = patch;
            bundle.review_feedback = t.stage_outputs.back().text;
            patch = push(stage_generate(instance, bundle, backend, cfg, sampling)).text;
            t.final_patch = patch;
            review = stage_verify(instance, patch, goal, backend, cfg, sampling);
            push(std::move(review.output));
            passed = review.verdict.passed;
        }
        t.verified = passed;
    } catch (const std::exception& e) {
        t.error = e.what();
        throw PipelineError(std::string("pipeline failed for ") + instance.id + ": " + e.what(), std::move(t));
    }
    return t;
}

}  // namespace stagefix
