#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/theme.hpp"

namespace themescreen::corpus {

enum class Speaker { kInterviewer, kParticipant };
enum class Split { kTrain, kDev, kTest, kUnassigned };

std::string_view speaker_name(Speaker s);
std::string_view split_name(Split s);
std::optional<Split> parse_split(std::string_view name);

struct DialogueTurn {
  Speaker speaker = Speaker::kInterviewer;
  std::string text;
  std::size_t turn_index = 0;

  bool operator==(const DialogueTurn&) const = default;
};

struct Transcript {
  std::string session_id;
  std::vector<DialogueTurn> turns;
  std::optional<int> label;  // 1 = depressed, 0 = not depressed
  Split split = Split::kUnassigned;

  bool operator==(const Transcript&) const = default;
};

// Throws CorpusError naming the offending field.
void validate(const Transcript& t);

// Session object from the JSONL schema. Throws CorpusError naming the field.
Transcript transcript_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Transcript& t);

// One session object per line. Errors name the 1-based line number.
std::vector<Transcript> parse_transcripts(std::string_view jsonl);
std::vector<Transcript> load_transcripts(const std::filesystem::path& path);

std::string to_jsonl(std::span<const Transcript> corpus);
void save_transcripts(const std::filesystem::path& path, std::span<const Transcript> corpus);

struct SyntheticSpec {
  std::size_t num_sessions = 200;
  double depression_ratio = 0.3;
  std::size_t turns_min = 12;
  std::size_t turns_max = 20;
  double distractor_ratio = 0.3;
  double marker_density = 0.8;
  std::uint64_t seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
};

// Where a generated turn came from; empty theme means small talk.
struct TurnOrigin {
  std::optional<ThemeId> theme;
  bool marker = false;
};

struct SyntheticSession {
  Transcript transcript;
  std::vector<TurnOrigin> origins;  // parallel to transcript.turns
};

std::vector<SyntheticSession> generate_synthetic_annotated(const SyntheticSpec& spec);
std::vector<Transcript> generate_synthetic(const SyntheticSpec& spec);

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

// Stratified, seeded assignment of the split field; corpus order is kept.
std::vector<Transcript> split_corpus(std::vector<Transcript> corpus, SplitFractions fractions,
                                     std::uint64_t seed);

std::vector<Transcript> select_split(std::span<const Transcript> corpus, Split split);

}  // namespace themescreen::corpus
