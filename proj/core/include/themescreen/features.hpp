#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/corpus.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/itas.hpp"
#include "themescreen/numeric/matrix.hpp"
#include "themescreen/ticl.hpp"

namespace themescreen::features {

// Output of the extraction stage for one session: themes plus LLM feedback.
struct ThemeRecord {
  std::string session_id;
  std::optional<int> label;
  corpus::Split split = corpus::Split::kUnassigned;
  ticl::ThemeSet themes;
  itas::Feedback feedback;
  int extraction_attempts = 0;
  bool extraction_fallback = false;
};

struct ThemeEmbedding {
  std::vector<std::string> tokens;
  numeric::Matrix values;  // one row per token
};

// Everything the model needs for a session. Embeddings are frozen.
struct SessionFeatures {
  std::string session_id;
  std::optional<int> label;
  corpus::Split split = corpus::Split::kUnassigned;
  ticl::ThemeSet themes;
  itas::Feedback feedback;
  ThemeArray<ThemeEmbedding> embeddings;
  std::string backend_id;

  ThemeArray<numeric::Matrix> matrices() const;
};

nlohmann::json to_json(const ThemeRecord& r);
ThemeRecord theme_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SessionFeatures& f);
SessionFeatures session_features_from_json(const nlohmann::json& j);

void save_theme_records(const std::filesystem::path& path, std::span<const ThemeRecord> records);
std::vector<ThemeRecord> load_theme_records(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path, std::span<const SessionFeatures> features);
std::vector<SessionFeatures> load_features(const std::filesystem::path& path);

// Hex SHA-256 over the exact embedding bytes of a session.
std::string features_digest(const SessionFeatures& f);

// Extraction then feedback, one call each per session.
ThemeRecord extract_record(const corpus::Transcript& t, const ticl::InContextTemplate& tmpl,
                           const itas::FeedbackPrompt& prompt, gateway::Gateway& gateway, int extraction_retries,
                           int feedback_retries);

// Embeds the five theme texts; NO_CONTENT themes embed the sentinel itself.
SessionFeatures embed_record(const ThemeRecord& r, gateway::Gateway& gateway);

}  // namespace themescreen::features
