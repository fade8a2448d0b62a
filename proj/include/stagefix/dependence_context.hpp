#pragma once

#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace stagefix {

/// A symbol tagged with the simple name of the class that defines it.
struct TaggedSymbol {
    std::string defining_class;
    std::string text;

    friend bool operator==(const TaggedSymbol&, const TaggedSymbol&) = default;
};

/// Class-level and one-layer repository-level symbols around a buggy method.
struct DependenceContext {
    std::vector<std::string> class_imports;
    std::vector<std::string> class_globals;
    std::vector<std::string> class_signatures;
    std::vector<TaggedSymbol> repo_globals;
    std::vector<TaggedSymbol> repo_signatures;

    [[nodiscard]] bool empty() const noexcept {
        return class_imports.empty() && class_globals.empty() && class_signatures.empty() &&
               repo_globals.empty() && repo_signatures.empty();
    }

    friend bool operator==(const DependenceContext&, const DependenceContext&) = default;
};

void to_json(nlohmann::json& j, const DependenceContext& ctx);
void from_json(const nlohmann::json& j, DependenceContext& ctx);

}  // namespace stagefix
