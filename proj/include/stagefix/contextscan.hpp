#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "stagefix/dependence_context.hpp"

namespace stagefix {

struct ImportDecl {
    std::string name;  // dotted, e.g. "a.b.C" or "a.b.*"
    std::string text;  // normalized statement, e.g. "import a.b.C;"
    bool is_static = false;
    bool is_wildcard = false;
};

struct FieldDecl {
    std::string name;
    std::string type_text;
    std::string declaration;  // whole statement, whitespace-normalized
};

struct MethodDecl {
    std::string name;
    std::string signature;  // header without body, whitespace-normalized
    std::size_t body_begin = 0;  // offset of '{', or of ';' for bodiless declarations
    std::size_t body_end = 0;    // one past the matching '}'
    bool has_body = false;
};

/// Structural view of one Java source file.
struct JavaUnit {
    std::string path;
    std::string package_name;
    std::string class_name;  // first top-level type
    std::vector<ImportDecl> imports;
    std::vector<FieldDecl> fields;
    std::vector<MethodDecl> methods;

    [[nodiscard]] std::string qualified_name() const {
        return package_name.empty() ? class_name : package_name + "." + class_name;
    }
};

class UnbalancedBraces : public std::runtime_error {
  public:
    UnbalancedBraces(std::string path, std::size_t offset, std::size_t line);
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }
    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t offset_;
    std::size_t line_;
};

/// Replaces comments and string/char literal contents with spaces. Length and
/// newline positions are preserved so offsets map back onto the source.
std::string blank_literals_and_comments(std::string_view source);

/// Lightweight structural scan: package, imports, class-body fields and
/// methods of the top-level types. Nested type members are not collected.
JavaUnit parse_java_unit(std::string_view source, std::string path = {});

/// Units addressable by qualified name and by package.
class RepoIndex {
  public:
    RepoIndex() = default;
    explicit RepoIndex(std::vector<JavaUnit> units);

    [[nodiscard]] const std::vector<JavaUnit>& units() const noexcept { return units_; }
    /// Units an import refers to: one for a type import, all units of the
    /// package for a wildcard, the owning type for a static member import.
    [[nodiscard]] std::vector<const JavaUnit*> resolve(const ImportDecl& import) const;

  private:
    std::vector<JavaUnit> units_;
    std::map<std::string, std::size_t> by_name_;
    std::multimap<std::string, std::size_t> by_package_;
};

/// Imports outside java/javax, fields named in the method, and signatures of
/// sibling methods invoked by it.
DependenceContext extract_class_context(const JavaUnit& unit, std::string_view buggy_method);

/// Fields and invoked method signatures from units directly imported by
/// `unit`. Imports of imported units are never followed.
DependenceContext extract_repo_context(const JavaUnit& unit, std::string_view buggy_method,
                                       const RepoIndex& repo);

/// Class-level plus repository-level context.
DependenceContext extract_context(const JavaUnit& unit, std::string_view buggy_method,
                                  const RepoIndex& repo);

inline constexpr std::string_view kNoContextSentinel = "No dependence context available.";

std::string render_context(const DependenceContext& ctx);

/// Result of scanning a source tree; files that failed to parse are listed
/// with their diagnostic instead of aborting the scan.
struct SourceScan {
    std::vector<JavaUnit> units;
    std::vector<std::string> sources;  // raw text, parallel to units
    std::vector<std::pair<std::string, std::string>> failures;  // (path, message)
};

SourceScan scan_source_tree(const std::filesystem::path& root);

/// Index into `units` of the file whose text contains the method, compared
/// token-wise. Returns npos when no file matches.
std::size_t locate_method(const SourceScan& scan, std::string_view method);

}  // namespace stagefix
