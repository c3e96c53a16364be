#include "themescreen/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/errors.hpp"
#include "themescreen/numeric/adam.hpp"
#include "themescreen/rng.hpp"

namespace themescreen::train {

using nlohmann::json;

TrainConfig TrainConfig::preset_named(std::string_view name) {
  TrainConfig c;
  if (name == "desk") {
    c.preset = "desk";
    c.learning_rate = 1e-3;
    c.epochs = 50;
    c.batch_size = 16;
  } else if (name == "paper") {
    c.preset = "paper";
    c.learning_rate = 1e-5;
    c.epochs = 80;
    c.batch_size = 32;
  } else {
    throw ConfigError("unknown train preset '" + std::string(name) + "' (expected desk or paper)");
  }
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("train.learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  model.validate();
}

json TrainConfig::to_json() const {
  return {{"preset", preset},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"model", model.to_json()}};
}

namespace {

int label_of(const features::SessionFeatures& s) {
  if (!s.label) throw TrainingError("session " + s.session_id + " has no label");
  return *s.label;
}

}  // namespace

Evaluation evaluate(const model::DetectionModel& m, std::span<const features::SessionFeatures> sessions) {
  Evaluation e;
  for (const auto& s : sessions) {
    const auto trace = m.forward(s.matrices(), s.feedback.scores());
    const int y = label_of(s);
    e.loss += model::bce_loss(trace.prediction.probability, y);
    e.pairs.emplace_back(trace.prediction.label, y);
    e.predictions.push_back(trace.prediction);
  }
  if (!e.pairs.empty()) e.metrics = eval::compute_metrics(e.pairs);
  return e;
}

TrainResult train(std::span<const features::SessionFeatures> train_set,
                  std::span<const features::SessionFeatures> dev_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw TrainingError("training split is empty");
  if (dev_set.empty()) throw TrainingError("dev split is empty");
  for (const auto& s : train_set) {
    for (const auto& e : s.embeddings) {
      if (e.values.cols() != config.model.d) {
        throw ConfigError("session " + s.session_id + " has embedding dimension " + std::to_string(e.values.cols()) +
                          " but the model expects d=" + std::to_string(config.model.d));
      }
    }
  }

  model::DetectionModel net(config.model, config.seed);
  numeric::Adam adam({.learning_rate = config.learning_rate});
  auto params = net.params();
  net.zero_grad();

  TrainResult result;
  std::optional<model::DetectionModel> best;
  double best_f1 = -1.0;
  double best_loss = INFINITY;

  auto record = [&](std::size_t epoch, double train_loss) {
    const Evaluation dev = evaluate(net, dev_set);
    EpochLog row{epoch, train_loss, dev.loss / static_cast<double>(dev_set.size()), dev.metrics, false};
    if (dev.metrics.wa_f1 > best_f1 || (dev.metrics.wa_f1 == best_f1 && row.dev_loss < best_loss)) {
      best_f1 = dev.metrics.wa_f1;
      best_loss = row.dev_loss;
      best = net;
      result.best_epoch = epoch;
      row.best = true;
    }
    spdlog::info("epoch {:>3}  train_loss {:.6f}  dev_loss {:.6f}  dev_wa_f1 {:.4f}", epoch, row.train_loss,
                 row.dev_loss, row.dev.wa_f1);
    result.log.push_back(row);
  };

  record(0, evaluate(net, train_set).loss / static_cast<double>(train_set.size()));

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = train_set[order[i]];
        const auto trace = net.forward(s.matrices(), s.feedback.scores());
        const double loss = net.backward(trace, label_of(s));
        if (!std::isfinite(loss) || !std::isfinite(trace.head.logit)) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " on session " + s.session_id +
                              " (logit " + std::to_string(trace.head.logit) + ")");
        }
        total += loss;
      }
      adam.step(params);
    }
    record(epoch, total / static_cast<double>(train_set.size()));
  }
  result.model = std::move(*best);
  return result;
}

std::string epoch_log_csv(std::span<const EpochLog> log) {
  std::ostringstream out;
  out << "epoch,train_loss,dev_loss,best," << eval::metrics_csv_header() << '\n';
  out.precision(8);
  for (const auto& r : log) {
    out << r.epoch << ',' << std::fixed << r.train_loss << ',' << r.dev_loss << ',' << (r.best ? 1 : 0) << ','
        << eval::metrics_csv_row(r.dev) << '\n';
  }
  return out.str();
}

}  // namespace themescreen::train
