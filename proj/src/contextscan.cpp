#include "stagefix/contextscan.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

#include "stagefix/tokenize.hpp"

namespace stagefix {

namespace {

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$' ||
           static_cast<unsigned char>(c) >= 0x80;
}

bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f'; }

const std::unordered_set<std::string_view>& modifiers() {
    static const std::unordered_set<std::string_view> set = {
        "public", "private", "protected", "static",   "final",  "transient", "volatile",
        "abstract", "synchronized", "native", "strictfp", "default", "sealed"};
    return set;
}

const std::unordered_set<std::string_view>& type_keywords() {
    static const std::unordered_set<std::string_view> set = {"class", "interface", "enum", "record"};
    return set;
}

const std::unordered_set<std::string_view>& statement_keywords() {
    static const std::unordered_set<std::string_view> set = {
        "if", "for", "while", "switch", "catch", "synchronized", "return", "new", "throw",
        "do", "try", "else", "assert", "super", "this"};
    return set;
}

// A lexical token of the structural text with its byte span.
struct Lex {
    std::string_view text;
    std::size_t begin;
    std::size_t end;
};

std::vector<Lex> lex(std::string_view text, std::size_t begin, std::size_t end) {
    std::vector<Lex> out;
    std::size_t i = begin;
    while (i < end) {
        const char c = text[i];
        if (is_ws(c)) {
            ++i;
        } else if (is_ident_char(c)) {
            std::size_t j = i + 1;
            while (j < end && is_ident_char(text[j])) ++j;
            out.push_back({text.substr(i, j - i), i, j});
            i = j;
        } else {
            out.push_back({text.substr(i, 1), i, i + 1});
            ++i;
        }
    }
    return out;
}

bool is_identifier(std::string_view tok) {
    return !tok.empty() && is_ident_start(tok.front()) &&
           std::all_of(tok.begin(), tok.end(), is_ident_char);
}

std::size_t line_of(std::string_view text, std::size_t offset) {
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(offset, text.size()), '\n'));
}

// Comments blanked; with `keep_literals` false string and char literal
// contents are blanked as well.
std::string blank(std::string_view src, bool keep_literals) {
    std::string out(src);
    const std::size_t n = src.size();
    std::size_t i = 0;
    auto wipe = [&](std::size_t k) {
        if (out[k] != '\n') out[k] = ' ';
    };
    while (i < n) {
        const char c = src[i];
        if (c == '/' && i + 1 < n && src[i + 1] == '/') {
            while (i < n && src[i] != '\n') wipe(i++);
        } else if (c == '/' && i + 1 < n && src[i + 1] == '*') {
            wipe(i++);
            wipe(i++);
            while (i < n && !(src[i] == '*' && i + 1 < n && src[i + 1] == '/')) wipe(i++);
            if (i < n) {
                wipe(i++);
                wipe(i++);
            }
        } else if (c == '"' && src.substr(i, 3) == "\"\"\"") {
            i += 3;
            while (i < n && src.substr(i, 3) != "\"\"\"") {
                if (src[i] == '\\' && i + 1 < n) {
                    if (!keep_literals) wipe(i);
                    ++i;
                }
                if (!keep_literals) wipe(i);
                ++i;
            }
            i = std::min(n, i + 3);
        } else if (c == '"' || c == '\'') {
            const char quote = c;
            ++i;
            while (i < n && src[i] != quote && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n) {
                    if (!keep_literals) wipe(i);
                    ++i;
                }
                if (!keep_literals) wipe(i);
                ++i;
            }
            if (i < n && src[i] == quote) ++i;
        } else {
            ++i;
        }
    }
    return out;
}

class Scanner {
  public:
    Scanner(std::string_view source, std::string path)
        : path_(std::move(path)),
          structural_(blank(source, false)),
          readable_(blank(source, true)),
          match_(structural_.size(), npos) {}

    JavaUnit run() {
        match_braces();
        JavaUnit unit;
        unit.path = path_;
        scan_top_level(unit);
        return unit;
    }

  private:
    static constexpr std::size_t npos = std::string::npos;

    void match_braces() {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < structural_.size(); ++i) {
            if (structural_[i] == '{') {
                open.push_back(i);
            } else if (structural_[i] == '}') {
                if (open.empty()) throw UnbalancedBraces(path_, i, line_of(structural_, i));
                match_[open.back()] = i;
                open.pop_back();
            }
        }
        if (!open.empty()) {
            throw UnbalancedBraces(path_, open.back(), line_of(structural_, open.back()));
        }
    }

    std::string text(std::size_t begin, std::size_t end) const {
        return normalize_whitespace(std::string_view(readable_).substr(begin, end - begin));
    }

    // Skips leading annotations (with optional argument lists).
    std::size_t skip_annotations(std::size_t begin, std::size_t end) const {
        std::size_t i = begin;
        for (;;) {
            while (i < end && is_ws(structural_[i])) ++i;
            if (i >= end || structural_[i] != '@') return i;
            std::size_t j = i + 1;
            while (j < end && is_ws(structural_[j])) ++j;
            const std::size_t name_begin = j;
            while (j < end && (is_ident_char(structural_[j]) || structural_[j] == '.')) ++j;
            if (std::string_view(structural_).substr(name_begin, j - name_begin) == "interface") return i;
            std::size_t k = j;
            while (k < end && is_ws(structural_[k])) ++k;
            if (k < end && structural_[k] == '(') {
                int depth = 0;
                for (; k < end; ++k) {
                    if (structural_[k] == '(') ++depth;
                    if (structural_[k] == ')' && --depth == 0) {
                        ++k;
                        break;
                    }
                }
                j = k;
            }
            i = j;
        }
    }

    void scan_top_level(JavaUnit& unit) {
        std::size_t seg = 0;
        std::size_t i = 0;
        const std::size_t n = structural_.size();
        std::set<std::string> seen_imports;
        while (i < n) {
            const char c = structural_[i];
            if (c == ';') {
                read_header_statement(unit, seg, i, seen_imports);
                seg = ++i;
            } else if (c == '{') {
                const std::size_t close = match_[i];
                const auto toks = lex(structural_, skip_annotations(seg, i), i);
                for (std::size_t t = 0; t + 1 < toks.size(); ++t) {
                    if (type_keywords().count(toks[t].text) && is_identifier(toks[t + 1].text)) {
                        if (unit.class_name.empty()) unit.class_name = std::string(toks[t + 1].text);
                        scan_body(unit, i + 1, close, toks[t].text == "enum");
                        break;
                    }
                }
                i = close + 1;
                seg = i;
            } else {
                ++i;
            }
        }
    }

    void read_header_statement(JavaUnit& unit, std::size_t begin, std::size_t end,
                               std::set<std::string>& seen) const {
        const auto toks = lex(structural_, skip_annotations(begin, end), end);
        if (toks.empty()) return;
        std::string dotted;
        std::size_t t = 1;
        bool is_static = false;
        if (toks[0].text == "package") {
            for (; t < toks.size(); ++t) dotted += toks[t].text;
            unit.package_name = dotted;
            return;
        }
        if (toks[0].text != "import") return;
        if (t < toks.size() && toks[t].text == "static") {
            is_static = true;
            ++t;
        }
        for (; t < toks.size(); ++t) dotted += toks[t].text;
        if (dotted.empty() || !seen.insert((is_static ? "static " : "") + dotted).second) return;
        ImportDecl decl;
        decl.name = dotted;
        decl.is_static = is_static;
        decl.is_wildcard = dotted.size() >= 2 && dotted.compare(dotted.size() - 2, 2, ".*") == 0;
        decl.text = "import " + std::string(is_static ? "static " : "") + dotted + ";";
        unit.imports.push_back(std::move(decl));
    }

    void scan_body(JavaUnit& unit, std::size_t begin, std::size_t end, bool is_enum) {
        std::size_t i = begin;
        if (is_enum) {
            // Enum constants run up to the first top-level ';'.
            int paren = 0;
            while (i < end) {
                const char c = structural_[i];
                if (c == '{') {
                    i = match_[i] + 1;
                    continue;
                }
                if (c == '(') ++paren;
                if (c == ')') --paren;
                if (c == ';' && paren == 0) break;
                ++i;
            }
            if (i >= end) return;
            ++i;
        }
        std::size_t seg = i;
        int paren = 0;
        while (i < end) {
            const char c = structural_[i];
            if (c == '(') {
                ++paren;
            } else if (c == ')') {
                --paren;
            } else if (c == '{') {
                const std::size_t close = match_[i];
                if (paren > 0 || has_assignment(seg, i)) {
                    i = close + 1;  // initializer, lambda or anonymous class body
                    continue;
                }
                if (auto m = method_header(seg, i)) {
                    m->body_begin = i;
                    m->body_end = close + 1;
                    m->has_body = true;
                    unit.methods.push_back(std::move(*m));
                }
                i = close + 1;
                seg = i;
                paren = 0;
                continue;
            } else if (c == ';' && paren == 0) {
                if (auto m = method_header(seg, i)) {
                    m->body_begin = i;
                    m->body_end = i + 1;
                    unit.methods.push_back(std::move(*m));
                } else {
                    read_fields(unit, seg, i);
                }
                seg = i + 1;
            }
            ++i;
        }
    }

    bool has_assignment(std::size_t begin, std::size_t end) const {
        int paren = 0;
        for (std::size_t i = begin; i < end; ++i) {
            const char c = structural_[i];
            if (c == '(') ++paren;
            if (c == ')') --paren;
            if (c == '=' && paren == 0) {
                const char prev = i > begin ? structural_[i - 1] : ' ';
                const char next = i + 1 < end ? structural_[i + 1] : ' ';
                if (next != '=' && prev != '=' && prev != '!' && prev != '<' && prev != '>') return true;
            }
        }
        return false;
    }

    std::optional<MethodDecl> method_header(std::size_t begin, std::size_t end) const {
        const std::size_t start = skip_annotations(begin, end);
        const auto toks = lex(structural_, start, end);
        std::size_t open = toks.size();
        for (std::size_t t = 0; t < toks.size(); ++t) {
            if (type_keywords().count(toks[t].text)) return std::nullopt;
            if (toks[t].text == "=") return std::nullopt;
            if (toks[t].text == "(") {
                open = t;
                break;
            }
        }
        if (open == 0 || open == toks.size()) return std::nullopt;
        const auto name = toks[open - 1].text;
        if (!is_identifier(name) || statement_keywords().count(name) || modifiers().count(name)) {
            return std::nullopt;
        }
        MethodDecl m;
        m.name = std::string(name);
        m.signature = text(toks.front().begin, toks.back().end);
        return m;
    }

    void read_fields(JavaUnit& unit, std::size_t begin, std::size_t end) const {
        const std::size_t start = skip_annotations(begin, end);
        const auto toks = lex(structural_, start, end);
        if (toks.empty()) return;
        std::size_t t = 0;
        while (t < toks.size() && modifiers().count(toks[t].text)) ++t;
        const std::size_t type_begin = t;
        // The first declarator name is the identifier that closes the type:
        // followed by '=', ',', '[' or the end, outside generic brackets.
        int angle = 0;
        std::size_t name_at = toks.size();
        for (; t < toks.size(); ++t) {
            const auto tok = toks[t].text;
            if (tok == "<") ++angle;
            if (tok == ">") --angle;
            if (angle != 0 || !is_identifier(tok) || t == type_begin) continue;
            const bool last = t + 1 == toks.size();
            if (last || toks[t + 1].text == "=" || toks[t + 1].text == "," ||
                (toks[t + 1].text == "[" && t + 2 < toks.size() && toks[t + 2].text == "]" &&
                 (t + 3 == toks.size() || toks[t + 3].text == "=" || toks[t + 3].text == ","))) {
                name_at = t;
                break;
            }
        }
        if (name_at == toks.size()) return;
        const std::string declaration = text(toks.front().begin, toks.back().end) + ";";
        const std::string type_text = text(toks[type_begin].begin, toks[name_at].begin);
        unit.fields.push_back({std::string(toks[name_at].text), type_text, declaration});

        // Further declarators: `int a = 1, b, c = f(x, y);`
        int depth = 0;
        for (t = name_at + 1; t < toks.size(); ++t) {
            const auto tok = toks[t].text;
            if (tok == "(" || tok == "[" || tok == "{") ++depth;
            if (tok == ")" || tok == "]" || tok == "}") --depth;
            if (tok == "," && depth == 0 && t + 1 < toks.size() && is_identifier(toks[t + 1].text)) {
                unit.fields.push_back({std::string(toks[t + 1].text), type_text, declaration});
            }
        }
    }

    std::string path_;
    std::string structural_;
    std::string readable_;
    std::vector<std::size_t> match_;
};

template <typename T>
void push_unique(std::vector<T>& v, T value) {
    if (std::find(v.begin(), v.end(), value) == v.end()) v.push_back(std::move(value));
}

struct MethodTokens {
    std::set<std::string> names;
    std::set<std::string> calls;  // names immediately followed by '('
    TokenStream header;           // buggy method header, annotations dropped
};

MethodTokens method_tokens(std::string_view buggy_method) {
    const auto toks = tokenize(buggy_method);
    MethodTokens out;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        out.names.insert(toks[i]);
        if (i + 1 < toks.size() && toks[i + 1] == "(") out.calls.insert(toks[i]);
    }
    std::size_t i = 0;
    while (i + 1 < toks.size() && toks[i] == "@") {
        i += 2;
        while (i + 1 < toks.size() && toks[i] == ".") i += 2;
        if (i < toks.size() && toks[i] == "(") {
            int depth = 0;
            for (; i < toks.size(); ++i) {
                if (toks[i] == "(") ++depth;
                if (toks[i] == ")" && --depth == 0) {
                    ++i;
                    break;
                }
            }
        }
    }
    std::vector<std::string> header;
    for (; i < toks.size() && toks[i] != "{"; ++i) header.push_back(toks[i]);
    out.header = TokenStream(std::move(header));
    return out;
}

std::string first_segment(const std::string& dotted) { return dotted.substr(0, dotted.find('.')); }

}  // namespace

UnbalancedBraces::UnbalancedBraces(std::string path, std::size_t offset, std::size_t line)
    : std::runtime_error((path.empty() ? std::string("<source>") : path) + ":" + std::to_string(line) +
                         ": unbalanced braces at offset " + std::to_string(offset)),
      offset_(offset),
      line_(line) {}

std::string blank_literals_and_comments(std::string_view source) { return blank(source, false); }

JavaUnit parse_java_unit(std::string_view source, std::string path) {
    return Scanner(source, std::move(path)).run();
}

RepoIndex::RepoIndex(std::vector<JavaUnit> units) : units_(std::move(units)) {
    for (std::size_t i = 0; i < units_.size(); ++i) {
        if (units_[i].class_name.empty()) continue;
        by_name_.emplace(units_[i].qualified_name(), i);
        by_package_.emplace(units_[i].package_name, i);
    }
}

std::vector<const JavaUnit*> RepoIndex::resolve(const ImportDecl& import) const {
    std::vector<const JavaUnit*> out;
    std::string target = import.name;
    if (import.is_static) {
        // static imports name a member (or '*') of a type
        const auto dot = target.rfind('.');
        if (dot == std::string::npos) return out;
        target.resize(dot);
    } else if (import.is_wildcard) {
        const auto package = target.substr(0, target.size() - 2);
        auto [lo, hi] = by_package_.equal_range(package);
        for (auto it = lo; it != hi; ++it) out.push_back(&units_[it->second]);
        return out;
    }
    if (auto it = by_name_.find(target); it != by_name_.end()) out.push_back(&units_[it->second]);
    return out;
}

DependenceContext extract_class_context(const JavaUnit& unit, std::string_view buggy_method) {
    const auto mt = method_tokens(buggy_method);
    DependenceContext ctx;
    for (const auto& imp : unit.imports) {
        const auto head = first_segment(imp.name);
        if (head == "java" || head == "javax") continue;
        push_unique(ctx.class_imports, imp.text);
    }
    for (const auto& f : unit.fields) {
        if (mt.names.count(f.name)) push_unique(ctx.class_globals, f.declaration);
    }
    for (const auto& m : unit.methods) {
        if (!mt.calls.count(m.name)) continue;
        if (tokenize(m.signature) == mt.header) continue;
        push_unique(ctx.class_signatures, m.signature);
    }
    return ctx;
}

DependenceContext extract_repo_context(const JavaUnit& unit, std::string_view buggy_method,
                                       const RepoIndex& repo) {
    const auto mt = method_tokens(buggy_method);
    DependenceContext ctx;
    for (const auto& imp : unit.imports) {
        for (const JavaUnit* dep : repo.resolve(imp)) {
            if (dep->qualified_name() == unit.qualified_name()) continue;
            for (const auto& f : dep->fields) {
                if (mt.names.count(f.name)) push_unique(ctx.repo_globals, TaggedSymbol{dep->class_name, f.declaration});
            }
            for (const auto& m : dep->methods) {
                if (mt.calls.count(m.name)) push_unique(ctx.repo_signatures, TaggedSymbol{dep->class_name, m.signature});
            }
        }
    }
    return ctx;
}

DependenceContext extract_context(const JavaUnit& unit, std::string_view buggy_method,
                                  const RepoIndex& repo) {
    auto ctx = extract_class_context(unit, buggy_method);
    auto cross = extract_repo_context(unit, buggy_method, repo);
    ctx.repo_globals = std::move(cross.repo_globals);
    ctx.repo_signatures = std::move(cross.repo_signatures);
    return ctx;
}

std::string render_context(const DependenceContext& ctx) {
    if (ctx.empty()) return std::string(kNoContextSentinel);
    std::vector<std::string> lines;
    auto section = [&](const char* title, const std::vector<std::string>& entries) {
        if (entries.empty()) return;
        lines.emplace_back(title);
        for (const auto& e : entries) lines.push_back("  " + e);
    };
    section("Imports:", ctx.class_imports);
    section("Class globals:", ctx.class_globals);
    section("Class method signatures:", ctx.class_signatures);

    std::vector<std::string> classes;
    for (const auto& s : ctx.repo_globals) push_unique(classes, s.defining_class);
    for (const auto& s : ctx.repo_signatures) push_unique(classes, s.defining_class);
    for (const auto& cls : classes) {
        lines.push_back("Cross-file (" + cls + "):");
        for (const auto& s : ctx.repo_globals) {
            if (s.defining_class == cls) lines.push_back("  " + s.text);
        }
        for (const auto& s : ctx.repo_signatures) {
            if (s.defining_class == cls) lines.push_back("  " + s.text);
        }
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) out.push_back('\n');
        out += lines[i];
    }
    return out;
}

SourceScan scan_source_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    SourceScan scan;
    std::vector<fs::path> files;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) return scan;
    for (fs::recursive_directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
        if (it->is_regular_file() && it->path().extension() == ".java") files.push_back(it->path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        const auto rel = fs::relative(file, root).generic_string();
        std::ifstream in(file, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        try {
            scan.units.push_back(parse_java_unit(buf.str(), rel));
            scan.sources.push_back(buf.str());
        } catch (const std::exception& e) {
            scan.failures.emplace_back(rel, e.what());
        }
    }
    return scan;
}

std::size_t locate_method(const SourceScan& scan, std::string_view method) {
    const auto needle = " " + tokenize(method).join() + " ";
    if (needle.size() <= 2) return std::string::npos;
    for (std::size_t i = 0; i < scan.units.size(); ++i) {
        const auto hay = " " + tokenize(blank(scan.sources[i], true)).join() + " ";
        if (hay.find(needle) != std::string::npos) return i;
    }
    return std::string::npos;
}

}  // namespace stagefix
