#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/eval.hpp"
#include "themescreen/features.hpp"
#include "themescreen/model.hpp"

namespace themescreen::train {

struct TrainConfig {
  std::string preset = "desk";
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  model::ModelConfig model;

  // desk: lr 1e-3, 50 epochs, batch 16. paper: lr 1e-5, 80 epochs, batch 32.
  static TrainConfig preset_named(std::string_view name);
  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the untrained model
  double train_loss = 0;  // mean per session
  double dev_loss = 0;
  eval::MetricsReport dev;
  bool best = false;
};

struct TrainResult {
  model::DetectionModel model;  // best-dev weights
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
};

// Summed BCE over sessions plus predictions, without touching gradients.
struct Evaluation {
  double loss = 0;
  std::vector<eval::LabelPair> pairs;
  std::vector<model::Prediction> predictions;
  eval::MetricsReport metrics;
};
Evaluation evaluate(const model::DetectionModel& m, std::span<const features::SessionFeatures> sessions);

// Adam over per-session gradients summed across each batch; dev WA-F1 after
// every epoch selects the kept weights (ties go to the lower dev loss).
// Throws TrainingError naming the session when a loss is not finite.
TrainResult train(std::span<const features::SessionFeatures> train_set,
                  std::span<const features::SessionFeatures> dev_set, const TrainConfig& config);

std::string epoch_log_csv(std::span<const EpochLog> log);

}  // namespace themescreen::train
