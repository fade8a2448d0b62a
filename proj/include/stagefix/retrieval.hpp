#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stagefix/corpus.hpp"
#include "stagefix/tokenize.hpp"

namespace stagefix {

enum class Facet { BuggyMethod, BuggyHunk, CommitMessage };

inline constexpr std::array<Facet, 3> kFacetOrder = {Facet::BuggyMethod, Facet::BuggyHunk,
                                                     Facet::CommitMessage};

const char* to_string(Facet facet);
Facet facet_from_string(const std::string& name);
const std::string& facet_text(const BugInstance& inst, Facet facet);

class RetrievalError : public std::runtime_error {
  public:
    enum class Kind { EmptyCorpus, UnknownDoc, TargetInCorpus, BadIndex };
    RetrievalError(Kind kind, const std::string& detail);
    [[nodiscard]] Kind kind() const noexcept { return kind_; }

  private:
    Kind kind_;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// BM25 index over one field of a corpus. Immutable once built.
class Bm25Index {
  public:
    struct Doc {
        std::string id;
        std::size_t length = 0;
        std::unordered_map<std::string, std::size_t> term_freq;
    };

    static Bm25Index build(const std::vector<BugInstance>& corpus, Facet facet, Bm25Params params = {});

    [[nodiscard]] Facet facet() const noexcept { return facet_; }
    [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }
    [[nodiscard]] std::size_t size() const noexcept { return docs_.size(); }
    [[nodiscard]] const std::vector<Doc>& docs() const noexcept { return docs_; }
    [[nodiscard]] double avg_doc_len() const noexcept { return avg_doc_len_; }
    /// Mean token count of the indexed field; the threshold's added term.
    [[nodiscard]] double field_avg_len() const noexcept { return field_avg_len_; }
    [[nodiscard]] std::size_t doc_freq(const std::string& term) const;
    [[nodiscard]] const std::map<std::string, std::size_t>& doc_freqs() const noexcept { return doc_freq_; }
    [[nodiscard]] bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

    /// Non-negative IDF: ln(1 + (N - df + 0.5) / (df + 0.5)).
    [[nodiscard]] double idf(const std::string& term) const;

    /// Sum over distinct query terms of idf * tf * (k1 + 1) /
    /// (tf + k1 * (1 - b + b * |d| / avgdl)).
    [[nodiscard]] double score(const TokenStream& query, const std::string& doc_id) const;
    [[nodiscard]] double score_doc(const TokenStream& query, std::size_t doc_index) const;

    /// len(query) + field_avg_len
    [[nodiscard]] double dynamic_threshold(const TokenStream& query) const;

    struct Hit {
        std::size_t doc_index;
        double score;
    };
    /// Highest-scoring document; ties go to the lexicographically smallest id.
    [[nodiscard]] Hit top1(const TokenStream& query) const;

    /// {facet, k1, b, avg_doc_len, field_avg_len, docs, postings}
    [[nodiscard]] nlohmann::json to_json() const;
    static Bm25Index from_json(const nlohmann::json& j);

  private:
    void finalize();

    Facet facet_ = Facet::BuggyMethod;
    Bm25Params params_;
    std::vector<Doc> docs_;
    std::map<std::string, std::size_t> doc_freq_;
    std::unordered_map<std::string, std::vector<std::size_t>> postings_;
    std::unordered_map<std::string, std::size_t> by_id_;
    double avg_doc_len_ = 0.0;
    double field_avg_len_ = 0.0;
};

double bm25_score(const Bm25Index& index, const TokenStream& query, const std::string& doc_id);

struct Demonstration {
    std::string source_id;
    std::string buggy_method;
    std::string fixed_method;
    Facet facet = Facet::BuggyMethod;
    double score = 0.0;
    double threshold = 0.0;
};

void to_json(nlohmann::json& j, const Demonstration& d);
void from_json(const nlohmann::json& j, Demonstration& d);

/// Three facet indexes over one corpus plus the texts needed to emit
/// demonstrations.
class DemonstrationPool {
  public:
    explicit DemonstrationPool(std::vector<BugInstance> corpus, Bm25Params params = {});
    DemonstrationPool(std::vector<BugInstance> corpus, std::array<Bm25Index, 3> indexes);

    [[nodiscard]] const Bm25Index& index(Facet facet) const;
    [[nodiscard]] const std::vector<BugInstance>& corpus() const noexcept { return corpus_; }

    /// Top-1 per facet in method, hunk, message order; kept only when the
    /// score strictly exceeds the facet threshold; deduplicated by source id.
    [[nodiscard]] std::vector<Demonstration> retrieve(const BugInstance& target) const;

  private:
    std::vector<BugInstance> corpus_;
    std::array<Bm25Index, 3> indexes_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

std::vector<Demonstration> retrieve_demonstrations(const DemonstrationPool& pool, const BugInstance& target);

}  // namespace stagefix
