#include "stagefix/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

namespace stagefix {

using json = nlohmann::json;

const char* to_string(Facet facet) {
    switch (facet) {
        case Facet::BuggyMethod: return "buggy_method";
        case Facet::BuggyHunk: return "buggy_hunk";
        case Facet::CommitMessage: return "commit_message";
    }
    return "unknown";
}

Facet facet_from_string(const std::string& name) {
    for (Facet f : kFacetOrder) {
        if (name == to_string(f)) return f;
    }
    throw RetrievalError(RetrievalError::Kind::BadIndex, "unknown facet '" + name + "'");
}

const std::string& facet_text(const BugInstance& inst, Facet facet) {
    switch (facet) {
        case Facet::BuggyMethod: return inst.buggy_method;
        case Facet::BuggyHunk: return inst.buggy_hunk;
        case Facet::CommitMessage: return inst.commit_message;
    }
    return inst.buggy_method;
}

namespace {

const char* kind_name(RetrievalError::Kind kind) {
    switch (kind) {
        case RetrievalError::Kind::EmptyCorpus: return "EmptyCorpus";
        case RetrievalError::Kind::UnknownDoc: return "UnknownDoc";
        case RetrievalError::Kind::TargetInCorpus: return "TargetInCorpus";
        case RetrievalError::Kind::BadIndex: return "BadIndex";
    }
    return "RetrievalError";
}

std::set<std::string> distinct_terms(const TokenStream& query) {
    return {query.begin(), query.end()};
}

}  // namespace

RetrievalError::RetrievalError(Kind kind, const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

Bm25Index Bm25Index::build(const std::vector<BugInstance>& corpus, Facet facet, Bm25Params params) {
    if (corpus.empty()) throw RetrievalError(RetrievalError::Kind::EmptyCorpus, "cannot index an empty corpus");
    Bm25Index index;
    index.facet_ = facet;
    index.params_ = params;
    index.docs_.reserve(corpus.size());
    for (const auto& inst : corpus) {
        Doc doc;
        doc.id = inst.id;
        const auto tokens = tokenize(facet_text(inst, facet));
        doc.length = tokens.size();
        for (const auto& t : tokens) ++doc.term_freq[t];
        index.docs_.push_back(std::move(doc));
    }
    index.finalize();
    return index;
}

void Bm25Index::finalize() {
    doc_freq_.clear();
    postings_.clear();
    by_id_.clear();
    std::size_t total_len = 0;
    for (std::size_t i = 0; i < docs_.size(); ++i) {
        const auto& doc = docs_[i];
        if (!by_id_.emplace(doc.id, i).second) {
            throw RetrievalError(RetrievalError::Kind::BadIndex, "duplicate document id '" + doc.id + "'");
        }
        total_len += doc.length;
        for (const auto& [term, _] : doc.term_freq) {
            ++doc_freq_[term];
            postings_[term].push_back(i);
        }
    }
    avg_doc_len_ = docs_.empty() ? 0.0 : static_cast<double>(total_len) / static_cast<double>(docs_.size());
    field_avg_len_ = avg_doc_len_;
}

std::size_t Bm25Index::doc_freq(const std::string& term) const {
    auto it = doc_freq_.find(term);
    return it == doc_freq_.end() ? 0 : it->second;
}

double Bm25Index::idf(const std::string& term) const {
    const auto n = static_cast<double>(docs_.size());
    const auto df = static_cast<double>(doc_freq(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25Index::score_doc(const TokenStream& query, std::size_t doc_index) const {
    const auto& doc = docs_.at(doc_index);
    if (avg_doc_len_ <= 0.0) return 0.0;
    const double norm = 1.0 - params_.b + params_.b * static_cast<double>(doc.length) / avg_doc_len_;
    double total = 0.0;
    for (const auto& term : distinct_terms(query)) {
        auto it = doc.term_freq.find(term);
        if (it == doc.term_freq.end()) continue;
        const auto tf = static_cast<double>(it->second);
        total += idf(term) * tf * (params_.k1 + 1.0) / (tf + params_.k1 * norm);
    }
    return total;
}

double Bm25Index::score(const TokenStream& query, const std::string& doc_id) const {
    auto it = by_id_.find(doc_id);
    if (it == by_id_.end()) throw RetrievalError(RetrievalError::Kind::UnknownDoc, "no document '" + doc_id + "'");
    return score_doc(query, it->second);
}

double Bm25Index::dynamic_threshold(const TokenStream& query) const {
    return static_cast<double>(query.size()) + field_avg_len_;
}

Bm25Index::Hit Bm25Index::top1(const TokenStream& query) const {
    if (docs_.empty()) throw RetrievalError(RetrievalError::Kind::EmptyCorpus, "index is empty");
    std::set<std::size_t> candidates;
    for (const auto& term : distinct_terms(query)) {
        if (auto it = postings_.find(term); it != postings_.end()) {
            candidates.insert(it->second.begin(), it->second.end());
        }
    }
    auto better = [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return docs_[a.doc_index].id < docs_[b.doc_index].id;
    };
    // Documents sharing no term score zero; the smallest id stands for them.
    std::size_t smallest = 0;
    for (std::size_t i = 1; i < docs_.size(); ++i) {
        if (docs_[i].id < docs_[smallest].id) smallest = i;
    }
    Hit best{smallest, candidates.count(smallest) ? score_doc(query, smallest) : 0.0};
    for (std::size_t i : candidates) {
        Hit h{i, score_doc(query, i)};
        if (better(h, best)) best = h;
    }
    return best;
}

json Bm25Index::to_json() const {
    json docs = json::array();
    for (const auto& d : docs_) docs.push_back({{"id", d.id}, {"length", d.length}});
    json postings = json::object();
    for (const auto& [term, _] : doc_freq_) {
        json list = json::array();
        for (std::size_t i : postings_.at(term)) list.push_back(json::array({i, docs_[i].term_freq.at(term)}));
        postings[term] = std::move(list);
    }
    return json{{"facet", to_string(facet_)},
                {"k1", params_.k1},
                {"b", params_.b},
                {"avg_doc_len", avg_doc_len_},
                {"field_avg_len", field_avg_len_},
                {"docs", std::move(docs)},
                {"postings", std::move(postings)}};
}

Bm25Index Bm25Index::from_json(const json& j) {
    try {
        Bm25Index index;
        index.facet_ = facet_from_string(j.at("facet").get<std::string>());
        index.params_.k1 = j.at("k1").get<double>();
        index.params_.b = j.at("b").get<double>();
        for (const auto& d : j.at("docs")) {
            Doc doc;
            doc.id = d.at("id").get<std::string>();
            doc.length = d.at("length").get<std::size_t>();
            index.docs_.push_back(std::move(doc));
        }
        for (const auto& [term, list] : j.at("postings").items()) {
            for (const auto& entry : list) {
                const auto i = entry.at(0).get<std::size_t>();
                if (i >= index.docs_.size()) {
                    throw RetrievalError(RetrievalError::Kind::BadIndex, "posting for '" + term + "' out of range");
                }
                index.docs_[i].term_freq[term] = entry.at(1).get<std::size_t>();
            }
        }
        index.finalize();
        if (j.contains("field_avg_len")) index.field_avg_len_ = j.at("field_avg_len").get<double>();
        return index;
    } catch (const json::exception& e) {
        throw RetrievalError(RetrievalError::Kind::BadIndex, e.what());
    }
}

double bm25_score(const Bm25Index& index, const TokenStream& query, const std::string& doc_id) {
    return index.score(query, doc_id);
}

void to_json(json& j, const Demonstration& d) {
    j = json{{"source_id", d.source_id},       {"buggy_method", d.buggy_method},
             {"fixed_method", d.fixed_method}, {"facet", to_string(d.facet)},
             {"score", d.score},               {"threshold", d.threshold}};
}

void from_json(const json& j, Demonstration& d) {
    d.source_id = j.at("source_id").get<std::string>();
    d.buggy_method = j.at("buggy_method").get<std::string>();
    d.fixed_method = j.at("fixed_method").get<std::string>();
    d.facet = facet_from_string(j.at("facet").get<std::string>());
    d.score = j.at("score").get<double>();
    d.threshold = j.value("threshold", 0.0);
}

DemonstrationPool::DemonstrationPool(std::vector<BugInstance> corpus, Bm25Params params)
    : corpus_(std::move(corpus)),
      indexes_{Bm25Index::build(corpus_, Facet::BuggyMethod, params),
               Bm25Index::build(corpus_, Facet::BuggyHunk, params),
               Bm25Index::build(corpus_, Facet::CommitMessage, params)} {
    for (std::size_t i = 0; i < corpus_.size(); ++i) by_id_.emplace(corpus_[i].id, i);
}

DemonstrationPool::DemonstrationPool(std::vector<BugInstance> corpus, std::array<Bm25Index, 3> indexes)
    : corpus_(std::move(corpus)), indexes_(std::move(indexes)) {
    for (std::size_t i = 0; i < corpus_.size(); ++i) by_id_.emplace(corpus_[i].id, i);
    for (std::size_t f = 0; f < kFacetOrder.size(); ++f) {
        if (indexes_[f].facet() != kFacetOrder[f]) {
            throw RetrievalError(RetrievalError::Kind::BadIndex,
                                 std::string("expected a ") + to_string(kFacetOrder[f]) + " index");
        }
        for (const auto& doc : indexes_[f].docs()) {
            if (!by_id_.count(doc.id)) {
                throw RetrievalError(RetrievalError::Kind::BadIndex,
                                     "indexed id '" + doc.id + "' is missing from the corpus");
            }
        }
    }
}

const Bm25Index& DemonstrationPool::index(Facet facet) const {
    return indexes_[static_cast<std::size_t>(facet)];
}

std::vector<Demonstration> DemonstrationPool::retrieve(const BugInstance& target) const {
    for (const auto& idx : indexes_) {
        if (idx.contains(target.id)) {
            throw RetrievalError(RetrievalError::Kind::TargetInCorpus,
                                 "target '" + target.id + "' is part of the retrieval corpus");
        }
    }
    std::vector<Demonstration> out;
    for (Facet facet : kFacetOrder) {
        const auto& idx = index(facet);
        const auto query = tokenize(facet_text(target, facet));
        const auto hit = idx.top1(query);
        const double threshold = idx.dynamic_threshold(query);
        if (!(hit.score > threshold)) continue;
        const auto& id = idx.docs()[hit.doc_index].id;
        if (std::any_of(out.begin(), out.end(), [&](const Demonstration& d) { return d.source_id == id; })) continue;
        const auto& src = corpus_[by_id_.at(id)];
        out.push_back({id, src.buggy_method, src.fixed_method, facet, hit.score, threshold});
    }
    return out;
}

std::vector<Demonstration> retrieve_demonstrations(const DemonstrationPool& pool, const BugInstance& target) {
    return pool.retrieve(target);
}

}  // namespace stagefix
