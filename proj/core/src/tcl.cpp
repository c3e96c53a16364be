#include "themescreen/tcl.hpp"

#include <cmath>

#include "themescreen/errors.hpp"
#include "themescreen/numeric/ops.hpp"

namespace themescreen::tcl {

using namespace numeric;

namespace {

Param uniform_param(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return Param(std::move(m));
}

void check_dim(const Matrix& x, const AttentionParams& p) {
  if (x.cols() != p.dim()) {
    throw ShapeError("attention: input " + x.shape_string() + " does not match d=" + std::to_string(p.dim()));
  }
}

}  // namespace

AttentionParams AttentionParams::init(std::size_t d, Stage owner, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionParams p;
  p.wq = uniform_param(d, d, bound, rng);
  p.wk = uniform_param(d, d, bound, rng);
  p.wv = uniform_param(d, d, bound, rng);
  p.owner = owner;
  return p;
}

AttentionParams AttentionParams::zeros(std::size_t d, Stage owner) {
  AttentionParams p;
  p.wq = Param(Matrix(d, d));
  p.wk = Param(Matrix(d, d));
  p.wv = Param(Matrix(d, d));
  p.owner = owner;
  return p;
}

void AttentionParams::zero_grad() {
  wq.zero_grad();
  wk.zero_grad();
  wv.zero_grad();
}

AttentionTrace correlate_traced(const Matrix& x, const AttentionParams& p) {
  check_dim(x, p);
  AttentionTrace t;
  t.x = x;
  t.q = matmul(x, p.wq.value);
  t.k = matmul(x, p.wk.value);
  t.v = matmul(x, p.wv.value);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  t.a = softmax_rows(scaled(matmul_nt(t.q, t.k), scale));
  t.out = matmul(t.a, t.v);
  return t;
}

Matrix correlation_matrix(const Matrix& x, const AttentionParams& p) {
  check_dim(x, p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
  return softmax_rows(scaled(matmul_nt(matmul(x, p.wq.value), matmul(x, p.wk.value)), scale));
}

Matrix correlate(const Matrix& x, const AttentionParams& p) { return correlate_traced(x, p).out; }

Matrix correlate_backward(const AttentionTrace& t, AttentionParams& p, const Matrix& dout) {
  if (dout.rows() != t.out.rows() || dout.cols() != t.out.cols()) {
    throw ShapeError("correlate_backward: gradient " + dout.shape_string() + " vs output " + t.out.shape_string());
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(t.x.cols()));
  const Matrix da = matmul_nt(dout, t.v);
  const Matrix dv = matmul_tn(t.a, dout);
  const Matrix ds = scaled(softmax_rows_backward(t.a, da), scale);
  const Matrix dq = matmul(ds, t.k);
  const Matrix dk = matmul_tn(ds, t.q);

  add_inplace(p.wq.grad, matmul_tn(t.x, dq));
  add_inplace(p.wk.grad, matmul_tn(t.x, dk));
  add_inplace(p.wv.grad, matmul_tn(t.x, dv));

  Matrix dx = matmul_nt(dq, p.wq.value);
  add_inplace(dx, matmul_nt(dk, p.wk.value));
  add_inplace(dx, matmul_nt(dv, p.wv.value));
  return dx;
}

Stage1Output stage1(std::span<const Matrix> themes, const AttentionParams& p) {
  Stage1Output s;
  s.themes.reserve(themes.size());
  for (const auto& x : themes) s.themes.push_back(correlate_traced(x, p));
  return s;
}

Stage2Output stage2(const Stage1Output& s1, const AttentionParams& p) {
  std::vector<Matrix> outs;
  outs.reserve(s1.themes.size());
  for (const auto& t : s1.themes) outs.push_back(t.out);
  RowConcat cat = concat_rows(outs);
  return {correlate_traced(cat.values, p), std::move(cat.boundaries)};
}

std::vector<Matrix> resplit(const Stage2Output& s2) { return split_rows(s2.trace.out, s2.boundaries); }

Matrix theme_affinity(const Matrix& attention, std::span<const std::size_t> boundaries) {
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != attention.rows() ||
      attention.rows() != attention.cols()) {
    throw ShapeError("theme_affinity: boundaries do not tile " + attention.shape_string());
  }
  const std::size_t k = boundaries.size() - 1;
  Matrix aff(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t r0 = boundaries[i];
    const std::size_t r1 = boundaries[i + 1];
    if (r1 <= r0) throw ShapeError("theme_affinity: empty segment");
    for (std::size_t j = 0; j < k; ++j) {
      double mass = 0.0;
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = boundaries[j]; c < boundaries[j + 1]; ++c) mass += attention(r, c);
      }
      aff(i, j) = mass / static_cast<double>(r1 - r0);
    }
  }
  return aff;
}

ThemeCorrelator::ThemeCorrelator(std::size_t d, bool enabled, Rng& rng) : enabled_(enabled), d_(d) {
  if (enabled_) {
    stage1_ = AttentionParams::init(d, Stage::kStage1, rng);
    stage2_ = AttentionParams::init(d, Stage::kStage2, rng);
  }
}

ThemeCorrelator::ThemeCorrelator(AttentionParams stage1, AttentionParams stage2)
    : enabled_(true), d_(stage1.dim()), stage1_(std::move(stage1)), stage2_(std::move(stage2)) {
  stage1_.owner = Stage::kStage1;
  stage2_.owner = Stage::kStage2;
  if (stage2_.dim() != d_) throw ShapeError("stage-1 and stage-2 attention dimensions differ");
}

CorrelationTrace ThemeCorrelator::forward(std::span<const Matrix> themes) const {
  CorrelationTrace t;
  if (!enabled_) {
    t.bypassed = true;
    t.per_theme.assign(themes.begin(), themes.end());
    return t;
  }
  t.s1 = stage1(themes, stage1_);
  t.s2 = stage2(t.s1, stage2_);
  t.per_theme = resplit(t.s2);
  return t;
}

std::vector<Matrix> ThemeCorrelator::backward(const CorrelationTrace& t, std::span<const Matrix> d_per_theme) {
  if (d_per_theme.size() != t.per_theme.size()) throw ShapeError("ThemeCorrelator::backward: theme count mismatch");
  if (t.bypassed) return {d_per_theme.begin(), d_per_theme.end()};
  const Matrix d_cat = concat_rows(d_per_theme).values;
  const Matrix d_s1_cat = correlate_backward(t.s2.trace, stage2_, d_cat);
  const std::vector<Matrix> d_s1 = split_rows(d_s1_cat, t.s2.boundaries);
  std::vector<Matrix> dx;
  dx.reserve(d_s1.size());
  for (std::size_t i = 0; i < d_s1.size(); ++i) dx.push_back(correlate_backward(t.s1.themes[i], stage1_, d_s1[i]));
  return dx;
}

std::vector<Param*> ThemeCorrelator::params() {
  if (!enabled_) return {};
  return {&stage1_.wq, &stage1_.wk, &stage1_.wv, &stage2_.wq, &stage2_.wk, &stage2_.wv};
}

}  // namespace themescreen::tcl
