#pragma once

#include <string>

namespace detkit {

inline constexpr const char* kCategoryPlaceholder = "<category>";

inline constexpr const char* kDefaultPromptTemplate =
    "Detect all the objects in the image that belong to the category set <category>.";

// Substitutes the first <category> placeholder with the category name.
// Throws ConfigError when the template has no placeholder.
std::string build_prompt(const std::string& category_name, const std::string& tmpl);

}  // namespace detkit
