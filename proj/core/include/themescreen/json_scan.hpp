#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace themescreen {

// First balanced {...} span in text that parses as a JSON object. Prose before
// and after is ignored; candidates that fail to parse are skipped.
std::optional<nlohmann::json> first_json_object(std::string_view text);

}  // namespace themescreen
