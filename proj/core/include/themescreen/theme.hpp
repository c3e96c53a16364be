#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace themescreen {

// The four interview themes plus the virtual whole-session theme.
enum class ThemeId : std::size_t { kFamily = 0, kWork, kMental, kMedical, kOverall };

inline constexpr std::size_t kThemeCount = 5;

inline constexpr std::array<ThemeId, kThemeCount> kAllThemes = {
    ThemeId::kFamily, ThemeId::kWork, ThemeId::kMental, ThemeId::kMedical,
    ThemeId::kOverall};

// Themes that correspond to concrete interview topics (everything but overall).
inline constexpr std::array<ThemeId, 4> kTopicThemes = {
    ThemeId::kFamily, ThemeId::kWork, ThemeId::kMental, ThemeId::kMedical};

template <class T>
using ThemeArray = std::array<T, kThemeCount>;

constexpr std::size_t index_of(ThemeId id) { return static_cast<std::size_t>(id); }

constexpr std::string_view theme_name(ThemeId id) {
  switch (id) {
    case ThemeId::kFamily: return "family";
    case ThemeId::kWork: return "work";
    case ThemeId::kMental: return "mental";
    case ThemeId::kMedical: return "medical";
    case ThemeId::kOverall: return "overall";
  }
  return "?";
}

constexpr std::optional<ThemeId> parse_theme(std::string_view name) {
  for (ThemeId id : kAllThemes) {
    if (theme_name(id) == name) return id;
  }
  return std::nullopt;
}

// Placeholder text for a theme the interview never touched.
inline constexpr std::string_view kNoContent = "NO_CONTENT";

}  // namespace themescreen
