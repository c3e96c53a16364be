#include "themescreen/model.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "themescreen/errors.hpp"
#include "themescreen/numeric/ops.hpp"

namespace themescreen::model {

using nlohmann::json;
using namespace numeric;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bce_loss(double y_hat, int y) {
  const double p = std::clamp(y_hat, 1e-12, 1.0 - 1e-12);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

DetectionHead::DetectionHead(std::size_t d, std::span<const std::size_t> hidden, Rng& rng) {
  std::size_t in = d;
  auto add = [&](std::size_t out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Matrix w(in, out);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    layers_.push_back({Param(std::move(w)), Param(Matrix(1, out))});
    in = out;
  };
  for (std::size_t h : hidden) add(h);
  add(1);
}

DetectionHead DetectionHead::zeros(std::size_t d, std::span<const std::size_t> hidden) {
  DetectionHead head;
  std::size_t in = d;
  for (std::size_t h : hidden) {
    head.layers_.push_back({Param(Matrix(in, h)), Param(Matrix(1, h))});
    in = h;
  }
  head.layers_.push_back({Param(Matrix(in, 1)), Param(Matrix(1, 1))});
  return head;
}

DetectionHead::Trace DetectionHead::forward(const Matrix& x) const {
  if (layers_.empty()) throw ShapeError("detection head has no layers");
  if (x.rows() != 1 || x.cols() != layers_.front().w.value.rows()) {
    throw ShapeError("detection head: input " + x.shape_string() + ", expected 1x" +
                     std::to_string(layers_.front().w.value.rows()));
  }
  Trace t;
  Matrix h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    t.inputs.push_back(h);
    Matrix z = matmul(h, layers_[i].w.value);
    add_inplace(z, layers_[i].b.value);
    if (i + 1 < layers_.size()) {
      for (double& v : z.values()) v = std::tanh(v);
    }
    h = std::move(z);
  }
  t.logit = h(0, 0);
  t.probability = sigmoid(t.logit);
  return t;
}

Matrix DetectionHead::backward(const Trace& t, double dlogit) {
  Matrix dz(1, 1, dlogit);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    auto& layer = layers_[i];
    add_inplace(layer.w.grad, matmul_tn(t.inputs[i], dz));
    add_inplace(layer.b.grad, dz);
    Matrix dh = matmul_nt(dz, layer.w.value);
    if (i > 0) {
      // inputs[i] is tanh output of layer i−1.
      const Matrix& a = t.inputs[i];
      for (std::size_t j = 0; j < dh.cols(); ++j) dh(0, j) *= 1.0 - a(0, j) * a(0, j);
    }
    dz = std::move(dh);
  }
  return dz;
}

std::vector<Param*> DetectionHead::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<std::size_t> ModelConfig::hidden_sizes() const {
  if (!hidden.empty()) return hidden;
  return {std::max<std::size_t>(1, d / 2)};
}

void ModelConfig::validate() const {
  if (d == 0) throw ConfigError("model dimension d must be positive");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("hidden layer sizes must be positive");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
}

json ModelConfig::to_json() const {
  return json{{"d", d},
              {"hidden", hidden_sizes()},
              {"itas_mode", itas::mode_name(itas_mode)},
              {"drop_theme", drop_theme ? json(theme_name(*drop_theme)) : json(nullptr)},
              {"disable_tcl", disable_tcl},
              {"disable_itas", disable_itas},
              {"threshold", threshold}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.d = j.at("d").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    auto mode = itas::parse_mode(j.at("itas_mode").get<std::string>());
    if (!mode) throw ConfigError("unknown itas_mode " + j.at("itas_mode").dump());
    c.itas_mode = *mode;
    if (!j.at("drop_theme").is_null()) {
      c.drop_theme = parse_theme(j["drop_theme"].get<std::string>());
      if (!c.drop_theme) throw ConfigError("unknown drop_theme " + j["drop_theme"].dump());
    }
    c.disable_tcl = j.at("disable_tcl").get<bool>();
    c.disable_itas = j.at("disable_itas").get<bool>();
    c.threshold = j.at("threshold").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

DetectionModel::DetectionModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.validate();
  // Separate streams so the head starts identical whether or not TCL exists.
  Rng tcl_rng(splitmix64(seed ^ 0x7c1ULL));
  Rng head_rng(splitmix64(seed ^ 0x4eadULL));
  tcl_ = tcl::ThemeCorrelator(config_.d, !config_.disable_tcl, tcl_rng);
  const auto hidden = config_.hidden_sizes();
  head_ = DetectionHead(config_.d, hidden, head_rng);
}

std::vector<ThemeId> DetectionModel::active_themes() const {
  std::vector<ThemeId> out;
  for (ThemeId id : kAllThemes) {
    if (config_.drop_theme != id) out.push_back(id);
  }
  return out;
}

itas::FeedbackWeights DetectionModel::weights_for(const ThemeArray<double>& scores) const {
  if (config_.disable_itas) return itas::uniform_weights(config_.drop_theme);
  return itas::scores_to_weights(scores, config_.itas_mode, config_.drop_theme);
}

Prediction DetectionModel::finish(double logit, double probability,
                                  std::span<const Matrix> pooled, std::span<const double> alpha) const {
  Prediction p;
  p.logit = logit;
  p.probability = probability;
  p.threshold = config_.threshold;
  p.label = probability >= config_.threshold ? 1 : 0;
  const auto active = active_themes();
  for (std::size_t i = 0; i < active.size(); ++i) {
    p.contribution_norms[index_of(active[i])] = std::abs(alpha[i]) * frobenius_norm(pooled[i]);
  }
  return p;
}

ForwardTrace DetectionModel::forward(const ThemeArray<Matrix>& embeddings, const ThemeArray<double>& scores) const {
  ForwardTrace t;
  t.active = active_themes();
  std::vector<Matrix> inputs;
  for (ThemeId id : t.active) inputs.push_back(embeddings[index_of(id)]);
  t.tcl = tcl_.forward(inputs);
  for (const auto& m : t.tcl.per_theme) t.pooled.push_back(mean_pool_rows(m));
  t.weights = weights_for(scores);
  for (ThemeId id : t.active) t.alpha.push_back(t.weights.alpha[index_of(id)]);
  t.x_final = itas::fuse_pooled(t.pooled, t.alpha);
  t.head = head_.forward(t.x_final);
  t.prediction = finish(t.head.logit, t.head.probability, t.pooled, t.alpha);
  return t;
}

double DetectionModel::backward(const ForwardTrace& t, int label) {
  const double loss = bce_loss(t.head.probability, label);
  const Matrix dx = head_.backward(t.head, bce_grad_logit(t.head.probability, label));
  const auto d_pooled = itas::fuse_pooled_backward(dx, t.alpha);
  std::vector<Matrix> d_themes;
  for (std::size_t i = 0; i < d_pooled.size(); ++i) {
    d_themes.push_back(mean_pool_rows_backward(d_pooled[i], t.tcl.per_theme[i].rows()));
  }
  tcl_.backward(t.tcl, d_themes);
  return loss;
}

Prediction DetectionModel::predict_from_pooled(std::span<const Matrix> pooled,
                                               const itas::FeedbackWeights& weights) const {
  const auto active = active_themes();
  if (pooled.size() != active.size()) throw ShapeError("predict_from_pooled: expected one pooled vector per active theme");
  std::vector<double> alpha;
  for (ThemeId id : active) alpha.push_back(weights.alpha[index_of(id)]);
  const Matrix x = itas::fuse_pooled(pooled, alpha);
  const auto head = head_.forward(x);
  return finish(head.logit, head.probability, pooled, alpha);
}

std::vector<Param*> DetectionModel::params() {
  auto out = tcl_.params();
  for (Param* p : head_.params()) out.push_back(p);
  return out;
}

std::size_t DetectionModel::parameter_count() {
  std::size_t n = 0;
  for (Param* p : params()) n += p->value.size();
  return n;
}

void DetectionModel::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

Checkpoint DetectionModel::to_checkpoint() const {
  Checkpoint c;
  c.config = config_.to_json();
  c.seed = seed_;
  if (tcl_.enabled()) {
    const auto& s1 = tcl_.stage1_params();
    const auto& s2 = tcl_.stage2_params();
    c.params["tcl.stage1.wq"] = s1.wq.value;
    c.params["tcl.stage1.wk"] = s1.wk.value;
    c.params["tcl.stage1.wv"] = s1.wv.value;
    c.params["tcl.stage2.wq"] = s2.wq.value;
    c.params["tcl.stage2.wk"] = s2.wk.value;
    c.params["tcl.stage2.wv"] = s2.wv.value;
  }
  for (std::size_t i = 0; i < head_.layers().size(); ++i) {
    c.params["head." + std::to_string(i) + ".w"] = head_.layers()[i].w.value;
    c.params["head." + std::to_string(i) + ".b"] = head_.layers()[i].b.value;
  }
  return c;
}

DetectionModel DetectionModel::from_checkpoint(const Checkpoint& ckpt) {
  DetectionModel m;
  m.config_ = ModelConfig::from_json(ckpt.config);
  m.seed_ = ckpt.seed;
  auto take = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end()) throw ConfigError("checkpoint is missing parameter " + name);
    if (it->second.rows() != rows || it->second.cols() != cols) {
      throw ShapeError("checkpoint parameter " + name + " has shape " + it->second.shape_string());
    }
    return Param(it->second);
  };
  const std::size_t d = m.config_.d;
  std::size_t expected = 0;
  if (!m.config_.disable_tcl) {
    tcl::AttentionParams s1{take("tcl.stage1.wq", d, d), take("tcl.stage1.wk", d, d), take("tcl.stage1.wv", d, d),
                            tcl::Stage::kStage1};
    tcl::AttentionParams s2{take("tcl.stage2.wq", d, d), take("tcl.stage2.wk", d, d), take("tcl.stage2.wv", d, d),
                            tcl::Stage::kStage2};
    m.tcl_ = tcl::ThemeCorrelator(std::move(s1), std::move(s2));
    expected += 6;
  }
  m.head_ = DetectionHead::zeros(d, m.config_.hidden_sizes());
  auto& layers = m.head_.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& w = layers[i].w.value;
    layers[i].w = take("head." + std::to_string(i) + ".w", w.rows(), w.cols());
    layers[i].b = take("head." + std::to_string(i) + ".b", 1, w.cols());
    expected += 2;
  }
  if (ckpt.params.size() != expected) throw ConfigError("checkpoint has unexpected extra parameters");
  return m;
}

}  // namespace themescreen::model
