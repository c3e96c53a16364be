#pragma once

#include <string_view>

// Delimiters that frame the payload inside prompts. The mock backend relies on
// them to find the dialogue or the theme texts it is asked about.
namespace themescreen::tags {

inline constexpr std::string_view kDialogueOpen = "<dialogue>";
inline constexpr std::string_view kDialogueClose = "</dialogue>";
inline constexpr std::string_view kThemesOpen = "<themes>";
inline constexpr std::string_view kThemesClose = "</themes>";
inline constexpr std::string_view kExampleOpen = "<example>";
inline constexpr std::string_view kExampleClose = "</example>";

inline constexpr std::string_view kInterviewerPrefix = "INTERVIEWER: ";
inline constexpr std::string_view kParticipantPrefix = "PARTICIPANT: ";

}  // namespace themescreen::tags
