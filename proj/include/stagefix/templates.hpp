#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace stagefix {

class TemplateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Named prompt sections loaded from a plain-text template file.
///
/// A section starts with a line `=== name ===` and runs to the next header.
/// Lines before the first header are comments. Inside a section `{name}` is
/// replaced by a variable and `{#name}...{/name}` is kept only when the
/// variable is non-empty. Braces that do not form such a tag are literal.
/// Substituted values are never re-expanded.
class PromptTemplates {
  public:
    static PromptTemplates parse(std::string_view text);
    /// Parses a file and checks that every pipeline section is present.
    static PromptTemplates load(const std::filesystem::path& path);
    /// The built-in template set shipped with the library.
    static const PromptTemplates& defaults();
    static std::string_view default_text();

    [[nodiscard]] bool has(const std::string& section) const { return sections_.count(section) != 0; }
    [[nodiscard]] const std::string& section(const std::string& name) const;
    [[nodiscard]] std::vector<std::string> names() const;
    void require_pipeline_sections() const;

    /// Expands a section. Unknown placeholders raise TemplateError.
    [[nodiscard]] std::string render(const std::string& section,
                                     const std::map<std::string, std::string>& vars) const;

  private:
    std::map<std::string, std::string> sections_;
};

/// Expands template text directly; see PromptTemplates for the syntax.
std::string render_template(std::string_view text, const std::map<std::string, std::string>& vars);

/// Sections the pipeline needs.
const std::vector<std::string>& required_sections();

}  // namespace stagefix
