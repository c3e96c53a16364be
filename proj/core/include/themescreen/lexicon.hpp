#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "themescreen/theme.hpp"

namespace themescreen {

struct MarkerPhrase {
  std::string phrase;  // lower case
  ThemeId theme;
};

// Depressive-marker phrases shared by the synthetic generator, the mock LLM
// backend and the tests.
class MarkerLexicon {
 public:
  static const MarkerLexicon& builtin();
  static MarkerLexicon from_json(std::string_view text);

  int version() const { return version_; }
  std::span<const MarkerPhrase> phrases() const { return phrases_; }

  // Case-insensitive count of phrase occurrences in text.
  std::size_t count_in(std::string_view text) const;
  bool contains_any(std::string_view text) const { return count_in(text) > 0; }
  // Marker phrases that occur in text, in lexicon order.
  std::vector<std::string> found_in(std::string_view text) const;

 private:
  int version_ = 0;
  std::vector<MarkerPhrase> phrases_;
};

enum class SentenceKind { kNeutral, kMarker, kSmallTalk };

struct SentenceOrigin {
  std::optional<ThemeId> theme;  // empty for small talk
  SentenceKind kind;
};

// Interviewer questions and participant answers the synthetic corpus is
// assembled from. Topic pools are indexed by ThemeId; the overall slot is empty.
class ThemeTemplates {
 public:
  static const ThemeTemplates& builtin();
  static ThemeTemplates from_json(std::string_view text);

  int version() const { return version_; }
  const std::vector<std::string>& questions(ThemeId topic) const;
  const std::vector<std::string>& neutral(ThemeId topic) const;
  const std::vector<std::string>& marker(ThemeId topic) const;
  const std::vector<std::string>& small_talk_questions() const { return small_talk_questions_; }
  const std::vector<std::string>& small_talk() const { return small_talk_; }

  // Which pool an exact participant sentence was drawn from, if any.
  std::optional<SentenceOrigin> origin_of(std::string_view sentence) const;

 private:
  void index();

  int version_ = 0;
  ThemeArray<std::vector<std::string>> questions_;
  ThemeArray<std::vector<std::string>> neutral_;
  ThemeArray<std::vector<std::string>> marker_;
  std::vector<std::string> small_talk_questions_;
  std::vector<std::string> small_talk_;
  std::unordered_map<std::string, SentenceOrigin> origin_;
};

std::string to_lower(std::string_view text);

}  // namespace themescreen
