#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/corpus.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/theme.hpp"

namespace themescreen::ticl {

struct FewShotExample {
  std::string dialogue;  // "SPEAKER: text" lines
  std::string expected;  // theme JSON, serialized
};

// Fixed prompt template for theme extraction. Loaded from a JSON data file.
struct InContextTemplate {
  int version = 0;
  std::string system_prompt;
  ThemeArray<std::string> per_theme_instruction;
  std::vector<FewShotExample> few_shot_examples;
  std::string output_schema_hint;
  // Topic vocabulary; a turn with none of these and no marker phrase is small
  // talk and is the first to go when a prompt is over budget.
  ThemeArray<std::vector<std::string>> theme_keywords;
  std::size_t max_prompt_tokens = 6000;
  int max_tokens = 1024;
  double temperature = 0.0;

  static const InContextTemplate& builtin();
  static InContextTemplate from_json(std::string_view text);
  static InContextTemplate load(const std::filesystem::path& path);

  void validate() const;  // throws ConfigError
};

struct ThemeContent {
  ThemeId theme_id = ThemeId::kFamily;
  std::string text = std::string(kNoContent);
  std::optional<std::string> source_note;

  bool empty() const { return text == kNoContent; }
  bool operator==(const ThemeContent&) const = default;
};

struct ThemeSet {
  std::string session_id;
  ThemeArray<ThemeContent> content;

  ThemeSet();
  static ThemeSet all_sentinel(std::string session_id);

  const std::string& text(ThemeId id) const { return content[index_of(id)].text; }
  bool all_empty() const;
  bool operator==(const ThemeSet&) const = default;
};

nlohmann::json to_json(const ThemeSet& themes);
ThemeSet theme_set_from_json(const nlohmann::json& j);

// Whitespace-token estimate used for the prompt budget.
std::size_t count_tokens(std::string_view text);

// Serialized dialogue followed by the per-theme instructions and schema hint.
// Over budget, the oldest small-talk turns are dropped first, then the oldest
// remaining turns; throws ConfigError naming the cap if even two turns do not fit.
gateway::ChatRequest build_prompt(const corpus::Transcript& transcript, const InContextTemplate& tmpl);

// Takes the first JSON object in text. Missing or non-string theme keys become
// NO_CONTENT; throws ParseError when no object is found.
ThemeSet parse_theme_response(std::string_view text, std::string session_id = {});

struct ExtractionResult {
  ThemeSet themes;
  int attempts = 0;
  bool fallback = false;        // all-sentinel set after repeated failures
  bool gateway_failed = false;  // the backend itself failed (as opposed to parsing)
};

// build_prompt -> chat -> parse, retrying parse failures `retries` times with
// the cache bypassed. Never throws for a failed backend or unparseable output.
ExtractionResult extract_themes(const corpus::Transcript& transcript, const InContextTemplate& tmpl,
                                gateway::Gateway& gateway, int retries = 2);

}  // namespace themescreen::ticl
