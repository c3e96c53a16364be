#pragma once

#include <span>
#include <string>
#include <vector>

#include "themescreen/eval.hpp"
#include "themescreen/features.hpp"
#include "themescreen/train.hpp"

namespace themescreen::ablation {

struct Variant {
  std::string name;
  train::TrainConfig config;
};

// Full model, each theme removed in turn, without TCL, without ITAS.
std::vector<Variant> variants(const train::TrainConfig& base);

struct Row {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t parameter_count = 0;
  std::size_t best_epoch = 0;
  eval::MetricsReport test;
};

// Trains and evaluates every variant on the same splits with the same seed.
std::vector<Row> run_ablations(std::span<const features::SessionFeatures> train_set,
                               std::span<const features::SessionFeatures> dev_set,
                               std::span<const features::SessionFeatures> test_set, const train::TrainConfig& base);

std::string to_csv(std::span<const Row> rows);
std::string to_markdown(std::span<const Row> rows);

}  // namespace themescreen::ablation
