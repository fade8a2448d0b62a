#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stagefix/corpus.hpp"
#include "stagefix/stats.hpp"
#include "stagefix/tokenize.hpp"

namespace stagefix {

class EvalError : public std::runtime_error {
  public:
    enum class Kind { KMismatch, IdenticalHunks, BadInput };
    EvalError(Kind kind, const std::string& detail);
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

struct MetricConfig {
    std::vector<std::size_t> k_values{1, 3, 5};
    void validate() const;
};

/// Token-level equality under the canonical tokenizer.
bool exact_match(const std::string& candidate, const std::string& ground_truth);

/// Fraction of instances where one of the first k candidates matches.
/// Throws KMismatch when a candidate list is longer than k.
double fix_at_k(const std::vector<std::vector<std::string>>& samples, const std::vector<std::string>& ground_truths,
                std::size_t k);

/// Unit-cost insert/delete/substitute distance between token streams.
std::size_t levenshtein_tokens(const TokenStream& a, const TokenStream& b);
std::size_t levenshtein_tokens(const std::string& candidate, const std::string& ground_truth);

enum class EditOp { Match, Substitute, Delete, Insert };

/// One minimal edit script from DP backtrace. At equal cost a match wins,
/// then substitution, then deletion, then insertion.
std::vector<EditOp> edit_script(const TokenStream& from, const TokenStream& to);

enum class BugType { SimpleDelete, SimpleInsert, SimpleReplace, Mixed };
inline constexpr BugType kBugTypes[] = {BugType::SimpleDelete, BugType::SimpleInsert, BugType::SimpleReplace,
                                        BugType::Mixed};

const char* to_string(BugType type);

/// Throws IdenticalHunks when the token streams are equal.
BugType classify_bug_type(const TokenStream& buggy_hunk, const TokenStream& fixed_hunk);
BugType classify_bug_type(const std::string& buggy_hunk, const std::string& fixed_hunk);

/// Buggy hunk tokens and the fixed-method tokens that replace them. Falls back
/// to trimming the common token prefix and suffix of both methods when the
/// fixed method does not keep the text around the hunk.
std::pair<TokenStream, TokenStream> hunk_pair(const BugInstance& instance);

/// Label of an instance; token-identical methods are labeled Mixed.
BugType instance_bug_type(const BugInstance& instance);

/// Candidate fixed method for a patch: a patch that starts with the buggy
/// method's header is taken as a whole method, otherwise it replaces the
/// buggy hunk.
std::string apply_patch(const BugInstance& instance, const std::string& patch);

struct OverlapResult {
    std::vector<std::string> models;
    /// (i, j), i != j: |fixed_i & fixed_j| / |fixed_i|. Diagonal holds the
    /// count of ids only model i fixed.
    std::vector<std::vector<double>> matrix;
    std::map<std::string, std::size_t> unique_fixed;
};

OverlapResult overlap_matrix(const std::map<std::string, std::set<std::string>>& fixed_sets);

/// Percentage with two decimals, rounding half up: 0.33965 -> "33.97".
std::string format_percent(double fraction);
std::string format_fixed(double value, int decimals);
/// Half-up rounding to `decimals` places.
double round_half_up(double value, int decimals);

struct TypeCounts {
    std::size_t total = 0;
    std::map<std::size_t, std::size_t> fixed;  // k -> count
};

struct ModelMetrics {
    std::size_t n_instances = 0;
    std::size_t missing = 0;  // instances without any candidate
    std::map<std::size_t, double> fix_at_k;
    std::map<std::size_t, std::size_t> fixed_at_k;
    double mean_levenshtein = 0.0;
    std::map<BugType, TypeCounts> per_type;
    std::vector<double> success_k1;  // per instance, corpus order
};

struct EvalReport {
    std::vector<std::size_t> k_values;
    std::map<std::string, ModelMetrics> models;
    OverlapResult overlap;
    std::map<std::string, TTestResult> t_tests;  // "a vs b"
};

/// Candidate patches per instance id, ordered by sample index.
using ModelCandidates = std::map<std::string, std::vector<std::string>>;

ModelMetrics evaluate_model(const std::vector<BugInstance>& corpus, const ModelCandidates& patches,
                            const MetricConfig& config);

/// Per-model metrics, plus overlap and paired t-tests (k = 1) when two or
/// more models are given.
EvalReport evaluate(const std::vector<BugInstance>& corpus, const std::map<std::string, ModelCandidates>& models,
                    const MetricConfig& config = {});

enum class ReportFormat { Json, Markdown };

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);
std::string render_report(const EvalReport& report, ReportFormat format);

}  // namespace stagefix
