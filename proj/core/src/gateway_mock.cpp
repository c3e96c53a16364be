// Deterministic offline backend. Chat responses are a pure function of the
// request and the mock seed; embeddings hash each token to a unit vector.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "themescreen/digest.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/lexicon.hpp"
#include "themescreen/prompt_tags.hpp"
#include "themescreen/rng.hpp"
#include "themescreen/theme.hpp"

namespace themescreen::gateway {

using nlohmann::json;

namespace {

constexpr std::string_view kSmallTalkSummary = "The participant only engaged in small talk.";

std::optional<std::string_view> between(std::string_view text, std::string_view open, std::string_view close) {
  const auto start = text.find(open);
  if (start == std::string_view::npos) return std::nullopt;
  const auto body = start + open.size();
  const auto end = text.find(close, body);
  if (end == std::string_view::npos) return std::nullopt;
  return text.substr(body, end - body);
}

// Theme a participant sentence belongs to: exact template match first, then
// the theme of the first marker phrase it contains. Small talk maps to none.
std::optional<ThemeId> route(std::string_view sentence) {
  if (auto origin = ThemeTemplates::builtin().origin_of(sentence)) return origin->theme;
  const std::string lower = to_lower(sentence);
  for (const auto& m : MarkerLexicon::builtin().phrases()) {
    if (lower.find(m.phrase) != std::string::npos) return m.theme;
  }
  return std::nullopt;
}

std::string extract_themes(std::string_view dialogue) {
  ThemeArray<std::vector<std::string>> found;
  std::size_t pos = 0;
  while (pos < dialogue.size()) {
    auto end = dialogue.find('\n', pos);
    if (end == std::string_view::npos) end = dialogue.size();
    std::string_view line = dialogue.substr(pos, end - pos);
    pos = end + 1;
    if (!line.starts_with(tags::kParticipantPrefix)) continue;
    const std::string_view sentence = line.substr(tags::kParticipantPrefix.size());
    if (auto theme = route(sentence)) found[index_of(*theme)].emplace_back(sentence);
  }

  json out = json::object();
  std::vector<std::string> summary;
  for (ThemeId topic : kTopicThemes) {
    const auto& sentences = found[index_of(topic)];
    std::string text;
    for (const auto& s : sentences) text += (text.empty() ? "" : " ") + s;
    out[std::string(theme_name(topic))] = sentences.empty() ? std::string(kNoContent) : text;
    if (!sentences.empty()) summary.push_back(sentences.front());
  }
  std::string overall;
  for (const auto& s : summary) overall += (overall.empty() ? "" : " ") + s;
  out["overall"] = summary.empty() ? std::string(kSmallTalkSummary) : overall;

  return "Here is the theme content extracted from the interview:\n" + out.dump(2) +
         "\nEach theme only contains statements made by the participant.";
}

// Topic score = 2.5 per marker phrase, capped at 10. The overall theme spans
// the whole session, so it gets the mean of the four topic scores.
std::string score_themes(std::string_view themes_block) {
  json themes;
  try {
    themes = json::parse(themes_block);
  } catch (const json::exception&) {
    return "I could not read the theme summaries.";
  }
  const MarkerLexicon& lexicon = MarkerLexicon::builtin();
  json scores = json::object();
  json rationales = json::object();
  double topic_sum = 0.0;
  for (ThemeId topic : kTopicThemes) {
    const std::string name(theme_name(topic));
    const std::string text = themes.value(name, std::string(kNoContent));
    const auto found = lexicon.found_in(text);
    const std::size_t count = lexicon.count_in(text);
    const double score = std::min(10.0, 2.5 * static_cast<double>(count));
    topic_sum += score;
    scores[name] = score;
    if (count == 0) {
      rationales[name] = "No depressive markers in this theme.";
    } else {
      std::string list;
      for (const auto& f : found) list += (list.empty() ? "" : ", ") + ("\"" + f + "\"");
      rationales[name] = std::to_string(count) + " depressive marker phrase(s): " + list + ".";
    }
  }
  scores["overall"] = topic_sum / 4.0;
  rationales["overall"] = "Mean of the four topic scores.";
  return "Scores:\n" + json{{"scores", scores}, {"rationales", rationales}}.dump(2);
}

std::string normalize_token(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && std::ispunct(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && std::ispunct(static_cast<unsigned char>(token[e - 1]))) --e;
  return to_lower(b == e ? token : token.substr(b, e - b));
}

class MockBackend final : public Backend {
 public:
  explicit MockBackend(const BackendConfig& config)
      : seed_(config.mock_seed), dim_(config.embedding_dim), id_(backend_id(config)) {}

  std::string id() const override { return id_; }

  std::string chat(const ChatRequest& request) override {
    if (auto dialogue = between(request.user_content, tags::kDialogueOpen, tags::kDialogueClose)) {
      return extract_themes(*dialogue);
    }
    if (auto themes = between(request.user_content, tags::kThemesOpen, tags::kThemesClose)) {
      return score_themes(*themes);
    }
    const std::string digest =
        sha256_hex(std::to_string(seed_) + '\0' + request.system_prompt + '\0' + request.user_content);
    return "mock response " + digest.substr(0, 16);
  }

  numeric::Matrix embed_tokens(std::span<const std::string> tokens) override {
    numeric::Matrix m(tokens.size(), dim_);
    for (std::size_t r = 0; r < tokens.size(); ++r) {
      std::uint64_t state = stable_hash64(normalize_token(tokens[r]), seed_);
      auto row = m.row(r);
      double norm = 0.0;
      for (double& v : row) {
        state = splitmix64(state);
        v = static_cast<double>(state >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : row) v /= norm;
    }
    return m;
  }

 private:
  std::uint64_t seed_;
  std::size_t dim_;
  std::string id_;
};

}  // namespace

std::unique_ptr<Backend> make_mock_backend(const BackendConfig& config) {
  return std::make_unique<MockBackend>(config);
}

}  // namespace themescreen::gateway
