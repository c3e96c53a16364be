#pragma once

#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "themescreen/corpus.hpp"
#include "themescreen/features.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/itas.hpp"
#include "themescreen/model.hpp"
#include "themescreen/ticl.hpp"

namespace themescreen::pipeline {

using numeric::Matrix;

// Attention maps, theme affinity and theme weights for one forward pass.
nlohmann::json figure_bundle(const features::SessionFeatures& f, const model::ForwardTrace& trace,
                             const model::DetectionModel& m);

struct SessionAnalysis {
  features::SessionFeatures features;
  std::vector<Matrix> pooled;  // stage-2 pooled vector per active theme
  itas::FeedbackWeights weights;
  model::Prediction prediction;
  nlohmann::json figures;
  bool degraded = false;  // extraction or feedback fell back
};

// Model forward over precomputed features. Override scores replace the LLM
// feedback (clinician source).
SessionAnalysis analyze(const model::DetectionModel& m, features::SessionFeatures f,
                        const std::optional<ThemeArray<double>>& override_scores = std::nullopt);

// Fusion and head only, over cached pooled vectors.
model::Prediction reweight(const model::DetectionModel& m, std::span<const Matrix> pooled,
                           const ThemeArray<double>& scores);

struct PredictOptions {
  const ticl::InContextTemplate* extraction_template = nullptr;  // builtin when null
  const itas::FeedbackPrompt* feedback_prompt = nullptr;          // builtin when null
  int extraction_retries = 2;
  int feedback_retries = 2;
  std::optional<ThemeArray<double>> override_scores;
};

// extract → (feedback unless overridden) → embed → model.
SessionAnalysis predict(const corpus::Transcript& t, const model::DetectionModel& m, gateway::Gateway& gateway,
                        const PredictOptions& options = {});

nlohmann::json prediction_json(const SessionAnalysis& a, bool include_figures = true);
nlohmann::json weights_json(const itas::FeedbackWeights& w);

}  // namespace themescreen::pipeline
