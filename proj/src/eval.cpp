#include "stagefix/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace stagefix {

using json = nlohmann::json;

namespace {

const char* kind_name(EvalError::Kind kind) {
    switch (kind) {
        case EvalError::Kind::KMismatch: return "KMismatch";
        case EvalError::Kind::IdenticalHunks: return "IdenticalHunks";
        case EvalError::Kind::BadInput: return "BadInput";
    }
    return "EvalError";
}

}  // namespace

EvalError::EvalError(Kind kind, const std::string& detail)
    : std::runtime_error(std::string(kind_name(kind)) + ": " + detail), kind_(kind) {}

void MetricConfig::validate() const {
    if (k_values.empty()) throw EvalError(EvalError::Kind::BadInput, "k_values is empty");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
        if (k_values[i] < 1) throw EvalError(EvalError::Kind::BadInput, "k must be >= 1");
        if (i > 0 && k_values[i] <= k_values[i - 1]) {
            throw EvalError(EvalError::Kind::BadInput, "k_values must be strictly ascending");
        }
    }
}

bool exact_match(const std::string& candidate, const std::string& ground_truth) {
    return tokenize(candidate) == tokenize(ground_truth);
}

double fix_at_k(const std::vector<std::vector<std::string>>& samples, const std::vector<std::string>& ground_truths,
                std::size_t k) {
    if (samples.size() != ground_truths.size()) {
        throw EvalError(EvalError::Kind::BadInput, "samples and ground truths differ in length");
    }
    if (samples.empty()) return 0.0;
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() > k) {
            throw EvalError(EvalError::Kind::KMismatch, "instance " + std::to_string(i) + " has " +
                                                            std::to_string(samples[i].size()) + " candidates for k=" +
                                                            std::to_string(k));
        }
        const auto truth = tokenize(ground_truths[i]);
        if (std::any_of(samples[i].begin(), samples[i].end(),
                        [&](const std::string& c) { return tokenize(c) == truth; })) {
            ++fixed;
        }
    }
    return static_cast<double>(fixed) / static_cast<double>(samples.size());
}

std::size_t levenshtein_tokens(const TokenStream& a, const TokenStream& b) {
    const std::size_t m = b.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

std::size_t levenshtein_tokens(const std::string& candidate, const std::string& ground_truth) {
    return levenshtein_tokens(tokenize(candidate), tokenize(ground_truth));
}

std::vector<EditOp> edit_script(const TokenStream& from, const TokenStream& to) {
    const std::size_t n = from.size();
    const std::size_t m = to.size();
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            d[i][j] = std::min({d[i - 1][j - 1] + (from[i - 1] == to[j - 1] ? 0 : 1), d[i - 1][j] + 1, d[i][j - 1] + 1});
        }
    }
    std::vector<EditOp> ops;
    std::size_t i = n;
    std::size_t j = m;
    while (i > 0 || j > 0) {
        if (i > 0 && j > 0 && from[i - 1] == to[j - 1] && d[i][j] == d[i - 1][j - 1]) {
            ops.push_back(EditOp::Match);
            --i;
            --j;
        } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
            ops.push_back(EditOp::Substitute);
            --i;
            --j;
        } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
            ops.push_back(EditOp::Delete);
            --i;
        } else {
            ops.push_back(EditOp::Insert);
            --j;
        }
    }
    std::reverse(ops.begin(), ops.end());
    return ops;
}

const char* to_string(BugType type) {
    switch (type) {
        case BugType::SimpleDelete: return "SimpleDelete";
        case BugType::SimpleInsert: return "SimpleInsert";
        case BugType::SimpleReplace: return "SimpleReplace";
        case BugType::Mixed: return "Mixed";
    }
    return "Unknown";
}

namespace {

BugType bug_type_from_string(const std::string& name) {
    for (auto t : kBugTypes) {
        if (name == to_string(t)) return t;
    }
    throw EvalError(EvalError::Kind::BadInput, "unknown bug type '" + name + "'");
}

}  // namespace

BugType classify_bug_type(const TokenStream& buggy_hunk, const TokenStream& fixed_hunk) {
    bool del = false;
    bool ins = false;
    bool sub = false;
    for (auto op : edit_script(buggy_hunk, fixed_hunk)) {
        del |= op == EditOp::Delete;
        ins |= op == EditOp::Insert;
        sub |= op == EditOp::Substitute;
    }
    const int kinds = int(del) + int(ins) + int(sub);
    if (kinds == 0) throw EvalError(EvalError::Kind::IdenticalHunks, "buggy and fixed hunks are identical");
    if (kinds > 1) return BugType::Mixed;
    if (del) return BugType::SimpleDelete;
    if (ins) return BugType::SimpleInsert;
    return BugType::SimpleReplace;
}

BugType classify_bug_type(const std::string& buggy_hunk, const std::string& fixed_hunk) {
    return classify_bug_type(tokenize(buggy_hunk), tokenize(fixed_hunk));
}

namespace {

std::size_t find_subsequence(const TokenStream& hay, const TokenStream& needle) {
    if (needle.empty() || needle.size() > hay.size()) return std::string::npos;
    for (std::size_t s = 0; s + needle.size() <= hay.size(); ++s) {
        if (std::equal(needle.begin(), needle.end(), hay.begin() + static_cast<std::ptrdiff_t>(s))) return s;
    }
    return std::string::npos;
}

TokenStream slice(const TokenStream& t, std::size_t begin, std::size_t end) {
    return TokenStream({t.begin() + static_cast<std::ptrdiff_t>(begin), t.begin() + static_cast<std::ptrdiff_t>(end)});
}

}  // namespace

std::pair<TokenStream, TokenStream> hunk_pair(const BugInstance& instance) {
    const auto buggy = tokenize(instance.buggy_method);
    const auto fixed = tokenize(instance.fixed_method);
    const auto hunk = tokenize(instance.buggy_hunk);
    if (const auto s = find_subsequence(buggy, hunk); s != std::string::npos) {
        const std::size_t prefix = s;
        const std::size_t suffix = buggy.size() - s - hunk.size();
        if (fixed.size() >= prefix + suffix &&
            std::equal(buggy.begin(), buggy.begin() + static_cast<std::ptrdiff_t>(prefix), fixed.begin()) &&
            std::equal(buggy.end() - static_cast<std::ptrdiff_t>(suffix), buggy.end(),
                       fixed.end() - static_cast<std::ptrdiff_t>(suffix))) {
            return {hunk, slice(fixed, prefix, fixed.size() - suffix)};
        }
    }
    std::size_t p = 0;
    while (p < buggy.size() && p < fixed.size() && buggy[p] == fixed[p]) ++p;
    std::size_t s = 0;
    while (s < buggy.size() - p && s < fixed.size() - p && buggy[buggy.size() - 1 - s] == fixed[fixed.size() - 1 - s]) ++s;
    return {slice(buggy, p, buggy.size() - s), slice(fixed, p, fixed.size() - s)};
}

BugType instance_bug_type(const BugInstance& instance) {
    const auto [from, to] = hunk_pair(instance);
    if (from == to) return BugType::Mixed;
    return classify_bug_type(from, to);
}

std::string apply_patch(const BugInstance& instance, const std::string& patch) {
    const auto method = tokenize(instance.buggy_method);
    const auto patch_tokens = tokenize(patch);
    std::size_t header = 0;
    while (header < method.size() && method[header] != "{") ++header;
    if (header >= 2 && header < method.size() && patch_tokens.size() > header &&
        std::equal(method.begin(), method.begin() + static_cast<std::ptrdiff_t>(header), patch_tokens.begin())) {
        return patch;
    }
    const auto text = normalize_whitespace(instance.buggy_method);
    const auto hunk = normalize_whitespace(instance.buggy_hunk);
    const auto pos = hunk.empty() ? std::string::npos : text.find(hunk);
    if (pos == std::string::npos) return patch;
    return text.substr(0, pos) + " " + patch + " " + text.substr(pos + hunk.size());
}

OverlapResult overlap_matrix(const std::map<std::string, std::set<std::string>>& fixed_sets) {
    OverlapResult r;
    for (const auto& [name, _] : fixed_sets) r.models.push_back(name);
    const std::size_t n = r.models.size();
    r.matrix.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto& fi = fixed_sets.at(r.models[i]);
        std::size_t unique = 0;
        for (const auto& id : fi) {
            bool elsewhere = false;
            for (std::size_t j = 0; j < n && !elsewhere; ++j) {
                if (j != i && fixed_sets.at(r.models[j]).count(id)) elsewhere = true;
            }
            if (!elsewhere) ++unique;
        }
        r.unique_fixed[r.models[i]] = unique;
        r.matrix[i][i] = static_cast<double>(unique);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const auto& fj = fixed_sets.at(r.models[j]);
            std::size_t both = 0;
            for (const auto& id : fi) both += fj.count(id);
            r.matrix[i][j] = fi.empty() ? 0.0 : static_cast<double>(both) / static_cast<double>(fi.size());
        }
    }
    return r;
}

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // The nudge absorbs binary representation error such as 3396.4999999.
    const double scaled = std::fabs(value) * scale;
    const double rounded = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled)) / scale;
    return std::copysign(rounded, value);
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(value, decimals));
    return buf;
}

std::string format_percent(double fraction) { return format_fixed(fraction * 100.0, 2); }

ModelMetrics evaluate_model(const std::vector<BugInstance>& corpus, const ModelCandidates& patches,
                            const MetricConfig& config) {
    config.validate();
    ModelMetrics m;
    m.n_instances = corpus.size();
    std::vector<std::vector<std::string>> candidates;
    std::vector<std::string> truths;
    double lev_sum = 0.0;
    for (const auto& inst : corpus) {
        std::vector<std::string> methods;
        if (auto it = patches.find(inst.id); it != patches.end()) {
            for (const auto& p : it->second) methods.push_back(apply_patch(inst, p));
        }
        if (methods.empty()) ++m.missing;
        lev_sum += static_cast<double>(levenshtein_tokens(methods.empty() ? std::string() : methods.front(),
                                                          inst.fixed_method));
        candidates.push_back(std::move(methods));
        truths.push_back(inst.fixed_method);
        auto& tc = m.per_type[instance_bug_type(inst)];
        ++tc.total;
    }
    for (auto t : kBugTypes) m.per_type[t];
    m.mean_levenshtein = corpus.empty() ? 0.0 : lev_sum / static_cast<double>(corpus.size());

    for (std::size_t k : config.k_values) {
        std::vector<std::vector<std::string>> first_k;
        for (const auto& c : candidates) {
            first_k.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(std::min(k, c.size())));
        }
        m.fix_at_k[k] = fix_at_k(first_k, truths, k);
        std::size_t fixed = 0;
        for (auto t : kBugTypes) m.per_type[t].fixed[k] = 0;
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            const auto truth = tokenize(truths[i]);
            const bool ok = std::any_of(first_k[i].begin(), first_k[i].end(),
                                        [&](const std::string& c) { return tokenize(c) == truth; });
            if (!ok) continue;
            ++fixed;
            ++m.per_type[instance_bug_type(corpus[i])].fixed[k];
        }
        m.fixed_at_k[k] = fixed;
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const bool ok = !candidates[i].empty() && exact_match(candidates[i].front(), truths[i]);
        m.success_k1.push_back(ok ? 1.0 : 0.0);
    }
    return m;
}

EvalReport evaluate(const std::vector<BugInstance>& corpus, const std::map<std::string, ModelCandidates>& models,
                    const MetricConfig& config) {
    EvalReport r;
    r.k_values = config.k_values;
    std::map<std::string, std::set<std::string>> fixed_sets;
    for (const auto& [name, patches] : models) {
        r.models[name] = evaluate_model(corpus, patches, config);
        auto& set = fixed_sets[name];
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            if (r.models[name].success_k1[i] > 0.5) set.insert(corpus[i].id);
        }
    }
    if (models.size() >= 2) {
        r.overlap = overlap_matrix(fixed_sets);
        if (corpus.size() >= 2) {
            for (auto a = models.begin(); a != models.end(); ++a) {
                for (auto b = std::next(a); b != models.end(); ++b) {
                    r.t_tests[a->first + " vs " + b->first] =
                        paired_t_test(r.models[a->first].success_k1, r.models[b->first].success_k1);
                }
            }
        }
    }
    return r;
}

namespace {

json number_or_null(double v, int decimals) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return round_half_up(v, decimals);
}

double number_from(const json& j) {
    if (j.is_null()) return std::nan("");
    if (j.is_string()) return j.get<std::string>()[0] == '-' ? -INFINITY : INFINITY;
    return j.get<double>();
}

}  // namespace

json report_to_json(const EvalReport& report) {
    json models = json::object();
    for (const auto& [name, m] : report.models) {
        json fix = json::object();
        json fixed = json::object();
        for (const auto& [k, v] : m.fix_at_k) fix[std::to_string(k)] = round_half_up(v * 100.0, 2);
        for (const auto& [k, v] : m.fixed_at_k) fixed[std::to_string(k)] = v;
        json types = json::object();
        for (const auto& [t, c] : m.per_type) {
            json f = json::object();
            for (const auto& [k, v] : c.fixed) f[std::to_string(k)] = v;
            types[to_string(t)] = {{"total", c.total}, {"fixed", f}};
        }
        models[name] = {{"n_instances", m.n_instances},
                        {"missing", m.missing},
                        {"fix_at_k", fix},
                        {"fixed_at_k", fixed},
                        {"mean_levenshtein", round_half_up(m.mean_levenshtein, 2)},
                        {"per_type", types}};
    }
    json matrix = json::array();
    for (std::size_t i = 0; i < report.overlap.matrix.size(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < report.overlap.matrix[i].size(); ++j) {
            // off-diagonal ratios as percentages, diagonal as unique counts
            row.push_back(i == j ? report.overlap.matrix[i][j] : round_half_up(report.overlap.matrix[i][j] * 100.0, 2));
        }
        matrix.push_back(std::move(row));
    }
    json tests = json::object();
    for (const auto& [pair, t] : report.t_tests) {
        tests[pair] = {{"t_statistic", number_or_null(t.t_statistic, 4)},
                       {"p_value", number_or_null(t.p_value, 6)},
                       {"degenerate", t.degenerate}};
    }
    return json{{"k_values", report.k_values},
                {"models", models},
                {"overlap", {{"models", report.overlap.models}, {"matrix", matrix}}},
                {"unique_fixed", report.overlap.unique_fixed},
                {"t_tests", tests}};
}

EvalReport report_from_json(const json& j) {
    try {
        EvalReport r;
        r.k_values = j.at("k_values").get<std::vector<std::size_t>>();
        for (const auto& [name, mj] : j.at("models").items()) {
            ModelMetrics m;
            m.n_instances = mj.at("n_instances").get<std::size_t>();
            m.missing = mj.value("missing", std::size_t{0});
            for (const auto& [k, v] : mj.at("fix_at_k").items()) m.fix_at_k[std::stoul(k)] = v.get<double>() / 100.0;
            for (const auto& [k, v] : mj.at("fixed_at_k").items()) m.fixed_at_k[std::stoul(k)] = v.get<std::size_t>();
            m.mean_levenshtein = mj.at("mean_levenshtein").get<double>();
            for (const auto& [t, cj] : mj.at("per_type").items()) {
                TypeCounts c;
                c.total = cj.at("total").get<std::size_t>();
                for (const auto& [k, v] : cj.at("fixed").items()) c.fixed[std::stoul(k)] = v.get<std::size_t>();
                m.per_type[bug_type_from_string(t)] = std::move(c);
            }
            r.models[name] = std::move(m);
        }
        const auto& ov = j.at("overlap");
        r.overlap.models = ov.at("models").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < ov.at("matrix").size(); ++i) {
            std::vector<double> row;
            for (std::size_t jx = 0; jx < ov.at("matrix")[i].size(); ++jx) {
                const double v = ov.at("matrix")[i][jx].get<double>();
                row.push_back(i == jx ? v : v / 100.0);
            }
            r.overlap.matrix.push_back(std::move(row));
        }
        r.overlap.unique_fixed = j.at("unique_fixed").get<std::map<std::string, std::size_t>>();
        for (const auto& [pair, tj] : j.at("t_tests").items()) {
            r.t_tests[pair] = {number_from(tj.at("t_statistic")), number_from(tj.at("p_value")),
                               tj.value("degenerate", false)};
        }
        return r;
    } catch (const json::exception& e) {
        throw EvalError(EvalError::Kind::BadInput, std::string("malformed report: ") + e.what());
    }
}

namespace {

std::string render_markdown(const EvalReport& r) {
    std::ostringstream os;
    os << "# Evaluation report\n\n";
    if (r.models.empty()) {
        os << "No models evaluated.\n";
        return os.str();
    }
    os << "| Model | Instances |";
    for (auto k : r.k_values) os << " Fix@" << k << " (%) |";
    os << " Levenshtein (k=1) |\n|---|---:|";
    for (std::size_t i = 0; i < r.k_values.size(); ++i) os << "---:|";
    os << "---:|\n";
    for (const auto& [name, m] : r.models) {
        os << "| " << name << " | " << m.n_instances << " |";
        for (auto k : r.k_values) os << " " << format_percent(m.fix_at_k.count(k) ? m.fix_at_k.at(k) : 0.0) << " |";
        os << " " << format_fixed(m.mean_levenshtein, 2) << " |\n";
    }

    os << "\n## Fixed instances by bug type\n\n| Model |";
    const auto& any = r.models.begin()->second;
    for (auto t : kBugTypes) {
        const auto total = any.per_type.count(t) ? any.per_type.at(t).total : 0;
        for (auto k : r.k_values) os << " " << to_string(t) << " (" << total << ") k=" << k << " |";
    }
    os << "\n|---|";
    for (std::size_t i = 0; i < 4 * r.k_values.size(); ++i) os << "---:|";
    os << "\n";
    for (const auto& [name, m] : r.models) {
        os << "| " << name << " |";
        for (auto t : kBugTypes) {
            for (auto k : r.k_values) {
                std::size_t fixed = 0;
                std::size_t total = 0;
                if (auto it = m.per_type.find(t); it != m.per_type.end()) {
                    total = it->second.total;
                    if (auto f = it->second.fixed.find(k); f != it->second.fixed.end()) fixed = f->second;
                }
                os << " " << fixed << " (" << format_percent(total ? double(fixed) / double(total) : 0.0) << "%) |";
            }
        }
        os << "\n";
    }

    if (!r.overlap.models.empty()) {
        os << "\n## Overlap of correct patches (k=1)\n\nRow model's fixes also fixed by the column model (%); "
              "the diagonal counts fixes unique to the row model.\n\n|  |";
        for (const auto& name : r.overlap.models) os << " " << name << " |";
        os << "\n|---|";
        for (std::size_t i = 0; i < r.overlap.models.size(); ++i) os << "---:|";
        os << "\n";
        for (std::size_t i = 0; i < r.overlap.models.size(); ++i) {
            os << "| " << r.overlap.models[i] << " |";
            for (std::size_t j = 0; j < r.overlap.models.size(); ++j) {
                if (i == j) {
                    os << " " << static_cast<std::size_t>(r.overlap.matrix[i][j]) << " |";
                } else {
                    os << " " << format_percent(r.overlap.matrix[i][j]) << " |";
                }
            }
            os << "\n";
        }
    }
    if (!r.t_tests.empty()) {
        os << "\n## Paired t-tests (k=1)\n\n| Pair | t | p |\n|---|---:|---:|\n";
        for (const auto& [pair, t] : r.t_tests) {
            const auto t_text = std::isnan(t.t_statistic) ? std::string("undefined")
                                : std::isinf(t.t_statistic) ? std::string(t.t_statistic > 0 ? "inf" : "-inf")
                                                            : format_fixed(t.t_statistic, 4);
            os << "| " << pair << " | " << t_text << " | "
               << (t.p_value < 0.001 ? std::string("< 0.001") : format_fixed(t.p_value, 4)) << " |\n";
        }
    }
    return os.str();
}

}  // namespace

std::string render_report(const EvalReport& report, ReportFormat format) {
    if (format == ReportFormat::Json) return report_to_json(report).dump(2) + "\n";
    return render_markdown(report);
}

}  // namespace stagefix
