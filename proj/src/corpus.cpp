#include "stagefix/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "stagefix/tokenize.hpp"

namespace stagefix {

using json = nlohmann::json;

void to_json(json& j, const DependenceContext& ctx) {
    auto tagged = [](const std::vector<TaggedSymbol>& v) {
        json arr = json::array();
        for (const auto& s : v) arr.push_back(json::array({s.defining_class, s.text}));
        return arr;
    };
    j = json{{"class_imports", ctx.class_imports},
             {"class_globals", ctx.class_globals},
             {"class_signatures", ctx.class_signatures},
             {"repo_globals", tagged(ctx.repo_globals)},
             {"repo_signatures", tagged(ctx.repo_signatures)}};
}

void from_json(const json& j, DependenceContext& ctx) {
    auto strings = [&](const char* key) {
        std::vector<std::string> out;
        if (j.contains(key)) out = j.at(key).get<std::vector<std::string>>();
        return out;
    };
    auto tagged = [&](const char* key) {
        std::vector<TaggedSymbol> out;
        if (!j.contains(key)) return out;
        for (const auto& pair : j.at(key)) {
            if (!pair.is_array() || pair.size() != 2) {
                throw json::type_error::create(302, std::string(key) + " entries must be [class, text]",
                                               &pair);
            }
            out.push_back({pair[0].get<std::string>(), pair[1].get<std::string>()});
        }
        return out;
    };
    ctx.class_imports = strings("class_imports");
    ctx.class_globals = strings("class_globals");
    ctx.class_signatures = strings("class_signatures");
    ctx.repo_globals = tagged("repo_globals");
    ctx.repo_signatures = tagged("repo_signatures");
}

void to_json(json& j, const BugInstance& inst) {
    j = json{{"id", inst.id},
             {"repo", inst.repo},
             {"buggy_method", inst.buggy_method},
             {"fixed_method", inst.fixed_method},
             {"buggy_hunk", inst.buggy_hunk},
             {"commit_message", inst.commit_message}};
    if (inst.commit_confidence) j["commit_confidence"] = *inst.commit_confidence;
    if (inst.context) j["context"] = *inst.context;
}

const char* to_string(CorpusError::Kind kind) {
    switch (kind) {
        case CorpusError::Kind::Io: return "Io";
        case CorpusError::Kind::MalformedJson: return "MalformedJson";
        case CorpusError::Kind::MissingField: return "MissingField";
        case CorpusError::Kind::InvalidField: return "InvalidField";
        case CorpusError::Kind::HunkNotInMethod: return "HunkNotInMethod";
        case CorpusError::Kind::DuplicateId: return "DuplicateId";
    }
    return "Unknown";
}

namespace {

std::string format_error(CorpusError::Kind kind, std::size_t line, const std::string& detail) {
    std::ostringstream os;
    if (line > 0) os << "line " << line << ": ";
    os << to_string(kind) << ": " << detail;
    return os.str();
}

std::string required_string(const json& record, const char* key, std::size_t line) {
    if (!record.contains(key)) {
        throw CorpusError(CorpusError::Kind::MissingField, line, std::string("missing field '") + key + "'");
    }
    const auto& v = record.at(key);
    if (!v.is_string()) {
        throw CorpusError(CorpusError::Kind::InvalidField, line, std::string("field '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

}  // namespace

CorpusError::CorpusError(Kind kind, std::size_t line, const std::string& detail)
    : std::runtime_error(format_error(kind, line, detail)), kind_(kind), line_(line) {}

bool hunk_in_method(const std::string& hunk, const std::string& method) {
    const auto h = normalize_whitespace(hunk);
    if (h.empty()) return false;
    return normalize_whitespace(method).find(h) != std::string::npos;
}

BugInstance parse_instance(const json& record, std::size_t line) {
    if (!record.is_object()) {
        throw CorpusError(CorpusError::Kind::MalformedJson, line, "record is not a JSON object");
    }
    BugInstance inst;
    inst.id = required_string(record, "id", line);
    inst.repo = required_string(record, "repo", line);
    inst.buggy_method = required_string(record, "buggy_method", line);
    inst.fixed_method = required_string(record, "fixed_method", line);
    inst.buggy_hunk = required_string(record, "buggy_hunk", line);
    inst.commit_message = required_string(record, "commit_message", line);

    if (inst.id.empty()) throw CorpusError(CorpusError::Kind::InvalidField, line, "empty id");
    if (inst.buggy_method == inst.fixed_method) {
        throw CorpusError(CorpusError::Kind::InvalidField, line,
                          "buggy_method and fixed_method are identical (id " + inst.id + ")");
    }
    if (!hunk_in_method(inst.buggy_hunk, inst.buggy_method)) {
        throw CorpusError(CorpusError::Kind::HunkNotInMethod, line,
                          "buggy_hunk is not contained in buggy_method (id " + inst.id + ")");
    }
    if (auto it = record.find("commit_confidence"); it != record.end() && !it->is_null()) {
        if (!it->is_number()) {
            throw CorpusError(CorpusError::Kind::InvalidField, line, "commit_confidence must be a number");
        }
        const double c = it->get<double>();
        if (c < 0.0 || c > 1.0) {
            throw CorpusError(CorpusError::Kind::InvalidField, line, "commit_confidence outside [0,1]");
        }
        inst.commit_confidence = c;
    }
    if (auto it = record.find("context"); it != record.end() && !it->is_null()) {
        try {
            inst.context = it->get<DependenceContext>();
        } catch (const json::exception& e) {
            throw CorpusError(CorpusError::Kind::InvalidField, line, std::string("bad context: ") + e.what());
        }
    }
    return inst;
}

std::vector<BugInstance> parse_corpus(const std::string& jsonl) {
    std::vector<BugInstance> out;
    std::unordered_set<std::string> ids;
    std::istringstream in(jsonl);
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (normalize_whitespace(text).empty()) continue;
        json record;
        try {
            record = json::parse(text);
        } catch (const json::parse_error& e) {
            throw CorpusError(CorpusError::Kind::MalformedJson, line, e.what());
        }
        auto inst = parse_instance(record, line);
        if (!ids.insert(inst.id).second) {
            throw CorpusError(CorpusError::Kind::DuplicateId, line, "duplicate id '" + inst.id + "'");
        }
        out.push_back(std::move(inst));
    }
    return out;
}

std::vector<BugInstance> load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorpusError(CorpusError::Kind::Io, 0, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_corpus(buf.str());
}

std::string dump_corpus(const std::vector<BugInstance>& instances) {
    std::string out;
    for (const auto& inst : instances) {
        out += json(inst).dump();
        out.push_back('\n');
    }
    return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<BugInstance>& instances) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CorpusError(CorpusError::Kind::Io, 0, "cannot write " + path.string());
    out << dump_corpus(instances);
}

std::vector<BugInstance> filter_instances(const std::vector<BugInstance>& instances,
                                          const FilterOptions& options) {
    std::vector<BugInstance> kept;
    for (const auto& inst : instances) {
        if (tokenize(inst.buggy_method).size() > options.max_tokens) continue;
        if (tokenize(inst.commit_message).size() < options.min_commit_tokens) continue;
        if (inst.commit_confidence && !(*inst.commit_confidence > options.min_confidence)) continue;
        kept.push_back(inst);
    }
    return kept;
}

namespace {

// Unbiased draw in [0, bound) from the raw 64-bit engine output. Kept local
// so splits are identical across standard library implementations.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

}  // namespace

CorpusSplit split_repo_disjoint(const std::vector<BugInstance>& instances, SplitRatio ratio,
                                std::uint64_t seed) {
    if (ratio.train + ratio.test == 0) throw std::invalid_argument("split ratio must be positive");
    std::map<std::string, std::size_t> repo_sizes;
    for (const auto& inst : instances) ++repo_sizes[inst.repo];
    if (repo_sizes.size() < 2) {
        throw InsufficientRepos("repository-disjoint split needs at least 2 repositories, got " +
                                std::to_string(repo_sizes.size()));
    }

    std::vector<std::string> order;
    for (const auto& [repo, _] : repo_sizes) order.push_back(repo);
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[draw_below(rng, i + 1)]);
    }

    const std::uint64_t total = instances.size();
    const std::uint64_t denom = ratio.train + ratio.test;
    std::set<std::string> train_repos;
    std::uint64_t train_count = 0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        if (train_count * denom >= total * ratio.train) break;
        train_repos.insert(order[i]);
        train_count += repo_sizes[order[i]];
    }

    CorpusSplit split;
    split.ratio = ratio;
    split.seed = seed;
    for (const auto& inst : instances) {
        (train_repos.count(inst.repo) ? split.train : split.test).push_back(inst);
    }
    for (const auto& [repo, _] : repo_sizes) {
        (train_repos.count(repo) ? split.train_repos : split.test_repos).push_back(repo);
    }
    return split;
}

json split_manifest(const CorpusSplit& split) {
    return json{{"seed", split.seed},
                {"ratio", json::array({split.ratio.train, split.ratio.test})},
                {"train_repos", split.train_repos},
                {"test_repos", split.test_repos}};
}

}  // namespace stagefix
