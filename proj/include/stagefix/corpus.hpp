#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stagefix/dependence_context.hpp"

namespace stagefix {

/// One bug-fixing record: buggy method, fixed method, buggy hunk and the
/// commit message, plus optional dependence context.
struct BugInstance {
    std::string id;
    std::string repo;
    std::string buggy_method;
    std::string fixed_method;
    std::string buggy_hunk;
    std::string commit_message;
    std::optional<DependenceContext> context;
    std::optional<double> commit_confidence;

    friend bool operator==(const BugInstance&, const BugInstance&) = default;
};

void to_json(nlohmann::json& j, const BugInstance& inst);

class CorpusError : public std::runtime_error {
  public:
    enum class Kind { Io, MalformedJson, MissingField, InvalidField, HunkNotInMethod, DuplicateId };

    CorpusError(Kind kind, std::size_t line, const std::string& detail);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    /// 1-based line number, 0 when the error is not tied to a line.
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    Kind kind_;
    std::size_t line_;
};

const char* to_string(CorpusError::Kind kind);

/// Parses and validates one JSON Lines record. `line` is only used for
/// error reporting.
BugInstance parse_instance(const nlohmann::json& record, std::size_t line);

/// Whitespace-normalized containment of the hunk inside the method.
bool hunk_in_method(const std::string& hunk, const std::string& method);

std::vector<BugInstance> parse_corpus(const std::string& jsonl);
std::vector<BugInstance> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<BugInstance>& instances);
std::string dump_corpus(const std::vector<BugInstance>& instances);

struct FilterOptions {
    std::size_t max_tokens = 300;
    std::size_t min_commit_tokens = 5;
    double min_confidence = 0.90;
};

/// Drops over-long methods, short commit messages and low-confidence
/// commits. Order-preserving.
std::vector<BugInstance> filter_instances(const std::vector<BugInstance>& instances,
                                          const FilterOptions& options = {});

struct SplitRatio {
    unsigned train = 9;
    unsigned test = 1;
};

struct CorpusSplit {
    std::vector<BugInstance> train;
    std::vector<BugInstance> test;
    SplitRatio ratio;
    std::uint64_t seed = 0;
    std::vector<std::string> train_repos;
    std::vector<std::string> test_repos;
};

class InsufficientRepos : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Repository-disjoint split. Repositories are shuffled with `seed` and
/// assigned to train until the train share first reaches the ratio; at
/// least one repository always goes to test.
CorpusSplit split_repo_disjoint(const std::vector<BugInstance>& instances, SplitRatio ratio,
                                std::uint64_t seed);

/// {seed, ratio, train_repos, test_repos}
nlohmann::json split_manifest(const CorpusSplit& split);

}  // namespace stagefix
