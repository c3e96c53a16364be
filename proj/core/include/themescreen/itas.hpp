#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/gateway.hpp"
#include "themescreen/numeric/matrix.hpp"
#include "themescreen/theme.hpp"
#include "themescreen/ticl.hpp"

namespace themescreen::itas {

using numeric::Matrix;

inline constexpr double kMinScore = 0.0;
inline constexpr double kMaxScore = 10.0;
inline constexpr double kNeutralScore = 5.0;

// γ·log_p_cond − (γ−1)·log_p_uncond, elementwise.
std::vector<double> guidance_combine(std::span<const double> log_p_uncond, std::span<const double> log_p_cond,
                                     double gamma);

enum class FeedbackSource { kLlm, kClinician };
enum class WeightMode { kNormalized, kLiteral };

std::string_view source_name(FeedbackSource s);
std::optional<FeedbackSource> parse_source(std::string_view name);
std::string_view mode_name(WeightMode m);
std::optional<WeightMode> parse_mode(std::string_view name);

struct FeedbackScore {
  ThemeId theme_id = ThemeId::kFamily;
  double score = kNeutralScore;  // [0, 10]
  std::string rationale;
  FeedbackSource source = FeedbackSource::kLlm;

  bool operator==(const FeedbackScore&) const = default;
};

// One score per theme in canonical order.
struct Feedback {
  ThemeArray<FeedbackScore> items;
  bool fallback = false;
  bool gateway_failed = false;
  int attempts = 0;

  static Feedback uniform(double score, FeedbackSource source, std::string rationale = {});
  static Feedback from_scores(const ThemeArray<double>& scores, FeedbackSource source);
  ThemeArray<double> scores() const;
};

nlohmann::json to_json(const Feedback& f);
Feedback feedback_from_json(const nlohmann::json& j);

// Throws ConfigError naming the first score outside [0, 10] or non-finite.
void check_scores(const ThemeArray<double>& scores);

struct FeedbackWeights {
  ThemeArray<double> w{};      // s_i / 10
  ThemeArray<double> alpha{};  // fusion weight; 0 for a dropped theme
  WeightMode mode = WeightMode::kNormalized;
  std::optional<ThemeId> dropped;
};

// w = s/10; normalized: α = softmax(1 + w) over the kept themes; literal:
// α = 1 + w. Scores must already be in range.
FeedbackWeights scores_to_weights(const ThemeArray<double>& scores, WeightMode mode,
                                  std::optional<ThemeId> drop = std::nullopt);

// The weights used when feedback weighting is switched off: 1/n per kept theme.
FeedbackWeights uniform_weights(std::optional<ThemeId> drop = std::nullopt);

struct FusedRepresentation {
  Matrix x_final;                     // 1×d
  std::vector<Matrix> pooled;         // mean-pooled theme outputs
  std::vector<Matrix> contributions;  // alpha_i · pooled_i
};

// Σ α_i · pooled_i, accumulated in theme order.
Matrix fuse_pooled(std::span<const Matrix> pooled, std::span<const double> alpha);
FusedRepresentation fuse(std::span<const Matrix> per_theme, std::span<const double> alpha);
// Gradients w.r.t. each pooled vector: α_i · dX.
std::vector<Matrix> fuse_pooled_backward(const Matrix& dx, std::span<const double> alpha);

struct FeedbackPrompt {
  int version = 0;
  std::string system_prompt;
  std::string instruction;
  int max_tokens = 512;
  double temperature = 0.0;

  static const FeedbackPrompt& builtin();
  static FeedbackPrompt from_json(std::string_view text);
  static FeedbackPrompt load(const std::filesystem::path& path);
};

gateway::ChatRequest build_feedback_request(const ticl::ThemeSet& themes, const FeedbackPrompt& prompt);

// Tolerant parse of {"scores": {...}, "rationales": {...}}. Missing themes get
// the neutral score and out-of-range scores are clamped, both with a warning.
// Throws ParseError when there is no usable object.
Feedback parse_feedback_response(std::string_view text);

// Simulated clinician feedback from the LLM. Never throws for backend or parse
// failures: falls back to the neutral score for every theme.
Feedback request_feedback(const ticl::ThemeSet& themes, const FeedbackPrompt& prompt, gateway::Gateway& gateway,
                          int retries = 2);

}  // namespace themescreen::itas
