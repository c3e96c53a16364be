#include "themescreen/lexicon.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "themescreen/embedded_data.hpp"
#include "themescreen/errors.hpp"

namespace themescreen {

using nlohmann::json;

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

const MarkerLexicon& MarkerLexicon::builtin() {
  static const MarkerLexicon lexicon = from_json(embedded::markers_json());
  return lexicon;
}

MarkerLexicon MarkerLexicon::from_json(std::string_view text) {
  MarkerLexicon lex;
  try {
    const json j = json::parse(text);
    lex.version_ = j.at("version").get<int>();
    for (const auto& m : j.at("markers")) {
      auto theme = parse_theme(m.at("theme").get<std::string>());
      if (!theme) throw ConfigError("marker lexicon: unknown theme " + m.at("theme").dump());
      lex.phrases_.push_back({to_lower(m.at("phrase").get<std::string>()), *theme});
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("marker lexicon: ") + e.what());
  }
  return lex;
}

std::size_t MarkerLexicon::count_in(std::string_view text) const {
  const std::string lower = to_lower(text);
  std::size_t count = 0;
  for (const auto& m : phrases_) {
    for (auto pos = lower.find(m.phrase); pos != std::string::npos;
         pos = lower.find(m.phrase, pos + m.phrase.size())) {
      ++count;
    }
  }
  return count;
}

std::vector<std::string> MarkerLexicon::found_in(std::string_view text) const {
  const std::string lower = to_lower(text);
  std::vector<std::string> found;
  for (const auto& m : phrases_) {
    if (lower.find(m.phrase) != std::string::npos) found.push_back(m.phrase);
  }
  return found;
}

namespace {

const std::vector<std::string> kEmpty;

std::vector<std::string> string_list(const json& j) { return j.get<std::vector<std::string>>(); }

}  // namespace

const ThemeTemplates& ThemeTemplates::builtin() {
  static const ThemeTemplates templates = from_json(embedded::theme_templates_json());
  return templates;
}

ThemeTemplates ThemeTemplates::from_json(std::string_view text) {
  ThemeTemplates t;
  try {
    const json j = json::parse(text);
    t.version_ = j.at("version").get<int>();
    for (ThemeId topic : kTopicThemes) {
      const std::string name(theme_name(topic));
      t.questions_[index_of(topic)] = string_list(j.at("questions").at(name));
      t.neutral_[index_of(topic)] = string_list(j.at("neutral").at(name));
      t.marker_[index_of(topic)] = string_list(j.at("marker").at(name));
    }
    t.small_talk_questions_ = string_list(j.at("questions").at("small_talk"));
    t.small_talk_ = string_list(j.at("small_talk"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("theme templates: ") + e.what());
  }
  t.index();
  return t;
}

void ThemeTemplates::index() {
  auto add = [&](const std::string& s, SentenceOrigin origin) {
    if (!origin_.emplace(s, origin).second) {
      throw ConfigError("theme templates: sentence appears in two pools: " + s);
    }
  };
  for (ThemeId topic : kTopicThemes) {
    for (const auto& s : neutral_[index_of(topic)]) add(s, {topic, SentenceKind::kNeutral});
    for (const auto& s : marker_[index_of(topic)]) add(s, {topic, SentenceKind::kMarker});
  }
  for (const auto& s : small_talk_) add(s, {std::nullopt, SentenceKind::kSmallTalk});
}

const std::vector<std::string>& ThemeTemplates::questions(ThemeId topic) const {
  return topic == ThemeId::kOverall ? kEmpty : questions_[index_of(topic)];
}
const std::vector<std::string>& ThemeTemplates::neutral(ThemeId topic) const {
  return topic == ThemeId::kOverall ? kEmpty : neutral_[index_of(topic)];
}
const std::vector<std::string>& ThemeTemplates::marker(ThemeId topic) const {
  return topic == ThemeId::kOverall ? kEmpty : marker_[index_of(topic)];
}

std::optional<SentenceOrigin> ThemeTemplates::origin_of(std::string_view sentence) const {
  auto it = origin_.find(std::string(sentence));
  if (it == origin_.end()) return std::nullopt;
  return it->second;
}

}  // namespace themescreen
