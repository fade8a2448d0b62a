#include "stagefix/templates.hpp"

#include <fstream>
#include <sstream>

namespace stagefix {

namespace {

bool is_name_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool is_name_char(char c) { return is_name_start(c) || (c >= '0' && c <= '9') || c == '.'; }

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace

std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars) {
    std::string out;
    const std::size_t n = text.size();
    std::size_t i = 0;
    while (i < n) {
        if (text[i] != '{') {
            out.push_back(text[i++]);
            continue;
        }
        std::size_t j = i + 1;
        char kind = 0;
        if (j < n && (text[j] == '#' || text[j] == '/')) kind = text[j++];
        std::size_t k = j;
        while (k < n && is_name_char(text[k])) ++k;
        if (k == j || !is_name_start(text[j]) || k >= n || text[k] != '}') {
            out.push_back(text[i++]);
            continue;
        }
        const std::string name(text.substr(j, k - j));
        auto it = vars.find(name);
        if (kind == 0) {
            if (it == vars.end()) throw TemplateError("unknown placeholder {" + name + "}");
            out += it->second;
            i = k + 1;
            continue;
        }
        if (kind == '/') throw TemplateError("closing tag {/" + name + "} without opening tag");

        const std::string close_tag = "{/" + name + "}";
        const std::size_t close = text.find(close_tag, k + 1);
        if (close == std::string_view::npos) throw TemplateError("unterminated block {#" + name + "}");
        if (it == vars.end()) throw TemplateError("unknown block variable {#" + name + "}");

        const bool open_alone = (i == 0 || text[i - 1] == '\n') && k + 1 < n && text[k + 1] == '\n';
        const std::size_t after_close = close + close_tag.size();
        const bool close_alone =
            close > 0 && text[close - 1] == '\n' && (after_close == n || text[after_close] == '\n');
        const std::size_t inner_begin = open_alone ? k + 2 : k + 1;
        if (!it->second.empty() && inner_begin <= close) {
            out += render_template(text.substr(inner_begin, close - inner_begin), vars);
        }
        i = close_alone && after_close < n ? after_close + 1 : after_close;
    }
    return out;
}

PromptTemplates PromptTemplates::parse(std::string_view text) {
    PromptTemplates t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string current;
    std::string body;
    bool in_section = false;
    auto flush = [&] {
        if (in_section) t.sections_[current] = rstrip(body);
        body.clear();
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.size() > 8 && line.rfind("=== ", 0) == 0 && line.compare(line.size() - 4, 4, " ===") == 0) {
            flush();
            current = line.substr(4, line.size() - 8);
            if (t.sections_.count(current)) throw TemplateError("duplicate section '" + current + "'");
            in_section = true;
            continue;
        }
        if (!in_section) continue;
        if (body.empty() && line.empty()) continue;
        body += line;
        body.push_back('\n');
    }
    flush();
    return t;
}

void PromptTemplates::require_pipeline_sections() const {
    for (const auto& name : required_sections()) {
        if (!has(name)) throw TemplateError("template set is missing section '" + name + "'");
    }
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot open template file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    auto t = parse(buf.str());
    t.require_pipeline_sections();
    return t;
}

const PromptTemplates& PromptTemplates::defaults() {
    static const PromptTemplates set = [] {
        auto t = parse(default_text());
        t.require_pipeline_sections();
        return t;
    }();
    return set;
}

const std::string& PromptTemplates::section(const std::string& name) const {
    auto it = sections_.find(name);
    if (it == sections_.end()) throw TemplateError("no template section '" + name + "'");
    return it->second;
}

std::vector<std::string> PromptTemplates::names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : sections_) out.push_back(name);
    return out;
}

std::string PromptTemplates::render(const std::string& name, const std::map<std::string, std::string>& vars) const {
    return rstrip(render_template(section(name), vars));
}

const std::vector<std::string>& required_sections() {
    static const std::vector<std::string> names = {
        "tester.system",    "developer.system", "reviewer.system", "report.task",  "report.user",
        "summary.task",     "summary.user",     "explanation.task", "explanation.user",
        "patterns.task",    "patterns.user",    "patch.task",      "patch.user",   "verify.task",
        "verify.user"};
    return names;
}

}  // namespace stagefix
