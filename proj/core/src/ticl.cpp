#include "themescreen/ticl.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/embedded_data.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/io.hpp"
#include "themescreen/json_scan.hpp"
#include "themescreen/lexicon.hpp"
#include "themescreen/prompt_tags.hpp"

namespace themescreen::ticl {

using nlohmann::json;

const InContextTemplate& InContextTemplate::builtin() {
  static const InContextTemplate tmpl = from_json(embedded::ticl_template_json());
  return tmpl;
}

InContextTemplate InContextTemplate::from_json(std::string_view text) {
  InContextTemplate t;
  try {
    const json j = json::parse(text);
    t.version = j.at("version").get<int>();
    t.system_prompt = j.at("system_prompt").get<std::string>();
    const json& instr = j.at("per_theme_instruction");
    for (ThemeId id : kAllThemes) {
      t.per_theme_instruction[index_of(id)] = instr.value(std::string(theme_name(id)), std::string());
    }
    for (const auto& ex : j.at("few_shot_examples")) {
      t.few_shot_examples.push_back({ex.at("dialogue").get<std::string>(), ex.at("expected").dump()});
    }
    t.output_schema_hint = j.at("output_schema_hint").get<std::string>();
    if (j.contains("theme_keywords")) {
      for (ThemeId id : kTopicThemes) {
        t.theme_keywords[index_of(id)] =
            j["theme_keywords"].value(std::string(theme_name(id)), std::vector<std::string>{});
      }
    }
    t.max_prompt_tokens = j.value("max_prompt_tokens", t.max_prompt_tokens);
    t.max_tokens = j.value("max_tokens", t.max_tokens);
    t.temperature = j.value("temperature", t.temperature);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("extraction template: ") + e.what());
  }
  t.validate();
  return t;
}

InContextTemplate InContextTemplate::load(const std::filesystem::path& path) {
  return from_json(read_text_file(path));
}

void InContextTemplate::validate() const {
  for (ThemeId id : kAllThemes) {
    if (per_theme_instruction[index_of(id)].empty()) {
      throw ConfigError("extraction template: missing instruction for theme " + std::string(theme_name(id)));
    }
  }
  if (few_shot_examples.empty()) throw ConfigError("extraction template: at least one few-shot example is required");
  if (max_prompt_tokens == 0) throw ConfigError("extraction template: max_prompt_tokens must be positive");
  if (max_tokens <= 0) throw ConfigError("extraction template: max_tokens must be positive");
  if (temperature < 0) throw ConfigError("extraction template: temperature must be >= 0");
}

ThemeSet::ThemeSet() {
  for (ThemeId id : kAllThemes) content[index_of(id)].theme_id = id;
}

ThemeSet ThemeSet::all_sentinel(std::string session_id) {
  ThemeSet s;
  s.session_id = std::move(session_id);
  return s;
}

bool ThemeSet::all_empty() const {
  return std::all_of(content.begin(), content.end(), [](const ThemeContent& c) { return c.empty(); });
}

json to_json(const ThemeSet& themes) {
  json j{{"session_id", themes.session_id}, {"themes", json::object()}};
  for (const auto& c : themes.content) {
    j["themes"][std::string(theme_name(c.theme_id))] = c.text;
    if (c.source_note) j["source_notes"][std::string(theme_name(c.theme_id))] = *c.source_note;
  }
  return j;
}

ThemeSet theme_set_from_json(const json& j) {
  ThemeSet s;
  try {
    s.session_id = j.at("session_id").get<std::string>();
    for (ThemeId id : kAllThemes) {
      const std::string name(theme_name(id));
      auto& c = s.content[index_of(id)];
      c.text = j.at("themes").at(name).get<std::string>();
      if (j.contains("source_notes") && j["source_notes"].contains(name)) {
        c.source_note = j["source_notes"][name].get<std::string>();
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("theme set: ") + e.what());
  }
  return s;
}

std::size_t count_tokens(std::string_view text) { return gateway::tokenize(text).size(); }

namespace {

std::string dialogue_line(const corpus::DialogueTurn& turn) {
  std::string line(turn.speaker == corpus::Speaker::kInterviewer ? tags::kInterviewerPrefix
                                                                 : tags::kParticipantPrefix);
  for (char c : turn.text) line += (c == '\n' || c == '\r') ? ' ' : c;
  return line;
}

bool is_small_talk(const corpus::DialogueTurn& turn, const InContextTemplate& tmpl) {
  const std::string lower = to_lower(turn.text);
  if (MarkerLexicon::builtin().contains_any(lower)) return false;
  for (const auto& words : tmpl.theme_keywords) {
    for (const auto& w : words) {
      if (lower.find(to_lower(w)) != std::string::npos) return false;
    }
  }
  return true;
}

std::string render(const InContextTemplate& tmpl, std::span<const std::string> lines) {
  std::string out;
  out += "Here is an example of the expected output.\n";
  for (const auto& ex : tmpl.few_shot_examples) {
    out += tags::kExampleOpen;
    out += "\nDialogue:\n" + ex.dialogue + "\nOutput:\n" + ex.expected + "\n";
    out += tags::kExampleClose;
    out += "\n";
  }
  out += "\nExtract the themes from this interview.\n";
  out += tags::kDialogueOpen;
  out += "\n";
  for (const auto& l : lines) out += l + "\n";
  out += tags::kDialogueClose;
  out += "\n\nThemes:\n";
  for (const auto& instr : tmpl.per_theme_instruction) out += instr + "\n";
  out += "\n" + tmpl.output_schema_hint;
  return out;
}

}  // namespace

gateway::ChatRequest build_prompt(const corpus::Transcript& transcript, const InContextTemplate& tmpl) {
  corpus::validate(transcript);
  const auto& turns = transcript.turns;
  std::vector<std::string> lines;
  std::vector<std::size_t> cost;
  for (const auto& t : turns) {
    lines.push_back(dialogue_line(t));
    cost.push_back(count_tokens(lines.back()));
  }
  const std::size_t fixed = count_tokens(tmpl.system_prompt) + count_tokens(render(tmpl, {}));
  std::size_t total = fixed + std::accumulate(cost.begin(), cost.end(), std::size_t{0});

  std::vector<bool> keep(turns.size(), true);
  std::size_t kept = turns.size();
  // The last two turns are never dropped.
  const std::size_t droppable = turns.size() > 2 ? turns.size() - 2 : 0;
  auto drop_oldest = [&](auto&& eligible) {
    for (std::size_t i = 0; i < droppable && total > tmpl.max_prompt_tokens && kept > 2; ++i) {
      if (keep[i] && eligible(i)) {
        keep[i] = false;
        --kept;
        total -= cost[i];
      }
    }
  };
  drop_oldest([&](std::size_t i) { return is_small_talk(turns[i], tmpl); });
  drop_oldest([](std::size_t) { return true; });
  if (total > tmpl.max_prompt_tokens) {
    throw ConfigError("session " + transcript.session_id + " needs " + std::to_string(total) +
                      " prompt tokens after truncation; the cap is " + std::to_string(tmpl.max_prompt_tokens));
  }
  if (kept < turns.size()) {
    spdlog::debug("session {}: dropped {} turns to fit the prompt budget", transcript.session_id,
                  turns.size() - kept);
  }

  std::vector<std::string> kept_lines;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (keep[i]) kept_lines.push_back(std::move(lines[i]));
  }
  return {tmpl.system_prompt, render(tmpl, kept_lines), tmpl.temperature, tmpl.max_tokens};
}

ThemeSet parse_theme_response(std::string_view text, std::string session_id) {
  const auto obj = first_json_object(text);
  if (!obj) throw ParseError("no JSON object in theme extraction response");
  ThemeSet s = ThemeSet::all_sentinel(std::move(session_id));
  for (ThemeId id : kAllThemes) {
    auto it = obj->find(std::string(theme_name(id)));
    if (it == obj->end() || !it->is_string()) continue;
    std::string value = it->get<std::string>();
    const auto first = value.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) continue;
    value = value.substr(first, value.find_last_not_of(" \t\r\n") - first + 1);
    s.content[index_of(id)].text = std::move(value);
  }
  return s;
}

ExtractionResult extract_themes(const corpus::Transcript& transcript, const InContextTemplate& tmpl,
                                gateway::Gateway& gateway, int retries) {
  ExtractionResult r;
  r.themes = ThemeSet::all_sentinel(transcript.session_id);
  auto give_up = [&](const std::string& why) {
    spdlog::warn("session {}: theme extraction fell back to NO_CONTENT after {} attempt(s): {}",
                 transcript.session_id, r.attempts, why);
    r.themes = ThemeSet::all_sentinel(transcript.session_id);
    for (auto& c : r.themes.content) c.source_note = "extraction failed: " + why;
    r.fallback = true;
    return r;
  };

  gateway::ChatRequest request;
  try {
    request = build_prompt(transcript, tmpl);
  } catch (const Error& e) {
    return give_up(e.what());
  }

  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    r.attempts = attempt + 1;
    gateway::ChatResponse response;
    try {
      response = gateway.chat(request, {.bypass_cache = attempt > 0});
    } catch (const GatewayError& e) {
      r.gateway_failed = true;
      return give_up(e.what());
    }
    try {
      r.themes = parse_theme_response(response.text, transcript.session_id);
      return r;
    } catch (const ParseError& e) {
      last_error = e.what();
      spdlog::warn("session {}: unparseable extraction response (attempt {}/{})", transcript.session_id,
                   attempt + 1, retries + 1);
    }
  }
  return give_up(last_error);
}

}  // namespace themescreen::ticl
