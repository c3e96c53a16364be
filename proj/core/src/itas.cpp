#include "themescreen/itas.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/embedded_data.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/io.hpp"
#include "themescreen/json_scan.hpp"
#include "themescreen/numeric/ops.hpp"
#include "themescreen/prompt_tags.hpp"

namespace themescreen::itas {

using nlohmann::json;

std::vector<double> guidance_combine(std::span<const double> log_p_uncond, std::span<const double> log_p_cond,
                                     double gamma) {
  if (log_p_uncond.size() != log_p_cond.size()) {
    throw ShapeError("guidance_combine: lengths " + std::to_string(log_p_uncond.size()) + " and " +
                     std::to_string(log_p_cond.size()) + " differ");
  }
  if (!std::isfinite(gamma) || gamma < 0) throw ConfigError("guidance_combine: gamma must be finite and >= 0");
  std::vector<double> out(log_p_cond.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    // The two γ identities hold bitwise: at γ=1 the second term is 0·u, at γ=0
    // the first is 0·c and the second is −(−1)·u.
    out[i] = gamma * log_p_cond[i] - (gamma - 1.0) * log_p_uncond[i];
  }
  return out;
}

std::string_view source_name(FeedbackSource s) { return s == FeedbackSource::kLlm ? "llm" : "clinician"; }

std::optional<FeedbackSource> parse_source(std::string_view name) {
  if (name == "llm") return FeedbackSource::kLlm;
  if (name == "clinician") return FeedbackSource::kClinician;
  return std::nullopt;
}

std::string_view mode_name(WeightMode m) { return m == WeightMode::kNormalized ? "normalized" : "literal"; }

std::optional<WeightMode> parse_mode(std::string_view name) {
  if (name == "normalized") return WeightMode::kNormalized;
  if (name == "literal") return WeightMode::kLiteral;
  return std::nullopt;
}

Feedback Feedback::uniform(double score, FeedbackSource source, std::string rationale) {
  Feedback f;
  for (ThemeId id : kAllThemes) f.items[index_of(id)] = {id, score, rationale, source};
  return f;
}

Feedback Feedback::from_scores(const ThemeArray<double>& scores, FeedbackSource source) {
  Feedback f;
  for (ThemeId id : kAllThemes) f.items[index_of(id)] = {id, scores[index_of(id)], {}, source};
  return f;
}

ThemeArray<double> Feedback::scores() const {
  ThemeArray<double> s{};
  for (std::size_t i = 0; i < kThemeCount; ++i) s[i] = items[i].score;
  return s;
}

json to_json(const Feedback& f) {
  json j{{"scores", json::object()}, {"rationales", json::object()},
         {"source", source_name(f.items[0].source)}};
  for (const auto& item : f.items) {
    const std::string name(theme_name(item.theme_id));
    j["scores"][name] = item.score;
    j["rationales"][name] = item.rationale;
  }
  if (f.fallback) j["fallback"] = true;
  return j;
}

Feedback feedback_from_json(const json& j) {
  Feedback f;
  try {
    const auto source = parse_source(j.value("source", std::string("llm")));
    if (!source) throw ParseError("feedback: unknown source " + j.at("source").dump());
    for (ThemeId id : kAllThemes) {
      const std::string name(theme_name(id));
      auto& item = f.items[index_of(id)];
      item.theme_id = id;
      item.score = j.at("scores").at(name).get<double>();
      item.source = *source;
      if (j.contains("rationales") && j["rationales"].contains(name)) {
        item.rationale = j["rationales"][name].get<std::string>();
      }
    }
    f.fallback = j.value("fallback", false);
  } catch (const json::exception& e) {
    throw ParseError(std::string("feedback: ") + e.what());
  }
  return f;
}

void check_scores(const ThemeArray<double>& scores) {
  for (ThemeId id : kAllThemes) {
    const double s = scores[index_of(id)];
    if (!std::isfinite(s) || s < kMinScore || s > kMaxScore) {
      throw ConfigError("score for theme " + std::string(theme_name(id)) + " is " + std::to_string(s) +
                        ", outside [0, 10]");
    }
  }
}

FeedbackWeights scores_to_weights(const ThemeArray<double>& scores, WeightMode mode, std::optional<ThemeId> drop) {
  check_scores(scores);
  FeedbackWeights fw;
  fw.mode = mode;
  fw.dropped = drop;
  for (std::size_t i = 0; i < kThemeCount; ++i) fw.w[i] = scores[i] / kMaxScore;
  auto kept = [&](std::size_t i) { return !drop || index_of(*drop) != i; };

  if (mode == WeightMode::kLiteral) {
    for (std::size_t i = 0; i < kThemeCount; ++i) fw.alpha[i] = kept(i) ? 1.0 + fw.w[i] : 0.0;
    return fw;
  }
  double max_z = -INFINITY;
  for (std::size_t i = 0; i < kThemeCount; ++i) {
    if (kept(i)) max_z = std::max(max_z, 1.0 + fw.w[i]);
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < kThemeCount; ++i) {
    fw.alpha[i] = kept(i) ? std::exp(1.0 + fw.w[i] - max_z) : 0.0;
    sum += fw.alpha[i];
  }
  for (double& a : fw.alpha) a /= sum;
  return fw;
}

FeedbackWeights uniform_weights(std::optional<ThemeId> drop) {
  FeedbackWeights fw;
  fw.dropped = drop;
  const double n = drop ? 4.0 : 5.0;
  for (std::size_t i = 0; i < kThemeCount; ++i) {
    fw.w[i] = 0.0;
    fw.alpha[i] = (drop && index_of(*drop) == i) ? 0.0 : 1.0 / n;
  }
  return fw;
}

Matrix fuse_pooled(std::span<const Matrix> pooled, std::span<const double> alpha) {
  if (pooled.empty() || pooled.size() != alpha.size()) throw ShapeError("fuse: theme count and weight count differ");
  Matrix x(1, pooled.front().cols());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    if (pooled[i].rows() != 1 || pooled[i].cols() != x.cols()) {
      throw ShapeError("fuse: pooled theme " + std::to_string(i) + " has shape " + pooled[i].shape_string());
    }
    numeric::axpy_inplace(x, alpha[i], pooled[i]);
  }
  return x;
}

FusedRepresentation fuse(std::span<const Matrix> per_theme, std::span<const double> alpha) {
  if (per_theme.size() != alpha.size()) throw ShapeError("fuse: theme count and weight count differ");
  FusedRepresentation r;
  for (const auto& m : per_theme) r.pooled.push_back(numeric::mean_pool_rows(m));
  r.x_final = fuse_pooled(r.pooled, alpha);
  for (std::size_t i = 0; i < r.pooled.size(); ++i) r.contributions.push_back(numeric::scaled(r.pooled[i], alpha[i]));
  return r;
}

std::vector<Matrix> fuse_pooled_backward(const Matrix& dx, std::span<const double> alpha) {
  std::vector<Matrix> out;
  out.reserve(alpha.size());
  for (double a : alpha) out.push_back(numeric::scaled(dx, a));
  return out;
}

const FeedbackPrompt& FeedbackPrompt::builtin() {
  static const FeedbackPrompt p = from_json(embedded::feedback_prompt_json());
  return p;
}

FeedbackPrompt FeedbackPrompt::from_json(std::string_view text) {
  FeedbackPrompt p;
  try {
    const json j = json::parse(text);
    p.version = j.at("version").get<int>();
    p.system_prompt = j.at("system_prompt").get<std::string>();
    p.instruction = j.at("instruction").get<std::string>();
    p.max_tokens = j.value("max_tokens", p.max_tokens);
    p.temperature = j.value("temperature", p.temperature);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("feedback prompt: ") + e.what());
  }
  if (p.max_tokens <= 0 || p.temperature < 0) throw ConfigError("feedback prompt: invalid max_tokens or temperature");
  return p;
}

FeedbackPrompt FeedbackPrompt::load(const std::filesystem::path& path) { return from_json(read_text_file(path)); }

gateway::ChatRequest build_feedback_request(const ticl::ThemeSet& themes, const FeedbackPrompt& prompt) {
  json body = json::object();
  for (const auto& c : themes.content) body[std::string(theme_name(c.theme_id))] = c.text;
  std::string user = prompt.instruction + "\n";
  user += tags::kThemesOpen;
  user += "\n" + body.dump(2) + "\n";
  user += tags::kThemesClose;
  return {prompt.system_prompt, user, prompt.temperature, prompt.max_tokens};
}

Feedback parse_feedback_response(std::string_view text) {
  const auto obj = first_json_object(text);
  if (!obj) throw ParseError("no JSON object in feedback response");
  const json& scores = obj->contains("scores") && (*obj)["scores"].is_object() ? (*obj)["scores"] : *obj;
  const json rationales = obj->value("rationales", json::object());

  Feedback f;
  bool any = false;
  for (ThemeId id : kAllThemes) {
    const std::string name(theme_name(id));
    auto& item = f.items[index_of(id)];
    item.theme_id = id;
    item.source = FeedbackSource::kLlm;
    auto it = scores.find(name);
    if (it == scores.end() || !it->is_number() || !std::isfinite(it->get<double>())) {
      spdlog::warn("feedback response has no usable score for {}; using {}", name, kNeutralScore);
      item.score = kNeutralScore;
    } else {
      any = true;
      const double raw = it->get<double>();
      item.score = std::clamp(raw, kMinScore, kMaxScore);
      if (item.score != raw) spdlog::warn("feedback score {} for {} clamped to {}", raw, name, item.score);
    }
    if (rationales.is_object() && rationales.contains(name) && rationales[name].is_string()) {
      item.rationale = rationales[name].get<std::string>();
    }
  }
  if (!any) throw ParseError("feedback response contains no theme scores");
  return f;
}

Feedback request_feedback(const ticl::ThemeSet& themes, const FeedbackPrompt& prompt, gateway::Gateway& gateway,
                          int retries) {
  if (themes.all_empty()) {
    return Feedback::uniform(kNeutralScore, FeedbackSource::kLlm, "No theme content to score.");
  }
  const gateway::ChatRequest request = build_feedback_request(themes, prompt);
  auto fallback = [&](int attempts, bool gateway_failed, const std::string& why) {
    spdlog::warn("session {}: feedback fell back to neutral scores after {} attempt(s): {}", themes.session_id,
                 attempts, why);
    Feedback f = Feedback::uniform(kNeutralScore, FeedbackSource::kLlm, "Fallback: " + why);
    f.fallback = true;
    f.gateway_failed = gateway_failed;
    f.attempts = attempts;
    return f;
  };
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    gateway::ChatResponse response;
    try {
      response = gateway.chat(request, {.bypass_cache = attempt > 0});
    } catch (const GatewayError& e) {
      return fallback(attempt + 1, true, e.what());
    }
    try {
      Feedback f = parse_feedback_response(response.text);
      f.attempts = attempt + 1;
      return f;
    } catch (const ParseError& e) {
      last_error = e.what();
    }
  }
  return fallback(retries + 1, false, last_error);
}

}  // namespace themescreen::itas
