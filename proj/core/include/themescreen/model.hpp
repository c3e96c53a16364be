#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/itas.hpp"
#include "themescreen/numeric/checkpoint.hpp"
#include "themescreen/numeric/matrix.hpp"
#include "themescreen/numeric/param.hpp"
#include "themescreen/rng.hpp"
#include "themescreen/tcl.hpp"
#include "themescreen/theme.hpp"

namespace themescreen::model {

using numeric::Matrix;
using numeric::Param;

double sigmoid(double x);

// −[y·log ŷ + (1−y)·log(1−ŷ)] with ŷ clamped to [1e-12, 1−1e-12].
double bce_loss(double y_hat, int y);
// d loss / d logit for ŷ = sigmoid(logit).
inline double bce_grad_logit(double y_hat, int y) { return y_hat - static_cast<double>(y); }

// Fully connected layers d → h… → 1 with tanh hidden activations and a
// sigmoid output.
class DetectionHead {
 public:
  struct Layer {
    Param w;  // in × out
    Param b;  // 1 × out
  };
  struct Trace {
    std::vector<Matrix> inputs;  // input of each layer
    double logit = 0.0;
    double probability = 0.5;
  };

  DetectionHead() = default;
  // Weights uniform in ±1/√fan_in, biases zero.
  DetectionHead(std::size_t d, std::span<const std::size_t> hidden, Rng& rng);
  static DetectionHead zeros(std::size_t d, std::span<const std::size_t> hidden);

  Trace forward(const Matrix& x) const;
  // Accumulates parameter gradients for d loss / d logit; returns dX.
  Matrix backward(const Trace& trace, double dlogit);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Param*> params();

 private:
  std::vector<Layer> layers_;
};

struct Prediction {
  double probability = 0.5;
  int label = 0;
  double threshold = 0.5;
  double logit = 0.0;
  ThemeArray<double> contribution_norms{};  // ‖α_i · pooled_i‖, 0 for dropped themes
};

struct ModelConfig {
  std::size_t d = 64;
  std::vector<std::size_t> hidden;  // empty means {d / 2}
  itas::WeightMode itas_mode = itas::WeightMode::kNormalized;
  std::optional<ThemeId> drop_theme;
  bool disable_tcl = false;
  bool disable_itas = false;
  double threshold = 0.5;

  std::vector<std::size_t> hidden_sizes() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Everything one forward pass produced, kept for backward and export.
struct ForwardTrace {
  std::vector<ThemeId> active;
  tcl::CorrelationTrace tcl;
  std::vector<Matrix> pooled;  // per active theme, 1×d
  itas::FeedbackWeights weights;
  std::vector<double> alpha;  // per active theme
  Matrix x_final;
  DetectionHead::Trace head;
  Prediction prediction;
};

// TCL → mean pooling → weighted fusion → head.
class DetectionModel {
 public:
  DetectionModel() = default;
  DetectionModel(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<ThemeId> active_themes() const;

  // Fusion weights for the given feedback scores under this model's flags.
  itas::FeedbackWeights weights_for(const ThemeArray<double>& scores) const;

  ForwardTrace forward(const ThemeArray<Matrix>& embeddings, const ThemeArray<double>& scores) const;
  // Adds gradients of the BCE loss for `label` into every parameter; returns the loss.
  double backward(const ForwardTrace& trace, int label);

  // Re-runs only fusion and the head over cached pooled stage outputs.
  Prediction predict_from_pooled(std::span<const Matrix> pooled, const itas::FeedbackWeights& weights) const;

  std::vector<Param*> params();
  std::size_t parameter_count();
  void zero_grad();

  numeric::Checkpoint to_checkpoint() const;
  static DetectionModel from_checkpoint(const numeric::Checkpoint& ckpt);

  tcl::ThemeCorrelator& correlator() { return tcl_; }
  const tcl::ThemeCorrelator& correlator() const { return tcl_; }
  DetectionHead& head() { return head_; }
  const DetectionHead& head() const { return head_; }

 private:
  Prediction finish(double logit, double probability, std::span<const Matrix> pooled,
                    std::span<const double> alpha) const;

  ModelConfig config_;
  std::uint64_t seed_ = 0;
  tcl::ThemeCorrelator tcl_;
  DetectionHead head_;
};

}  // namespace themescreen::model
