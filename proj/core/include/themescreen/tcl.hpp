#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "themescreen/numeric/matrix.hpp"
#include "themescreen/numeric/param.hpp"
#include "themescreen/rng.hpp"

// Two-stage theme correlation: token self-attention inside each theme with
// shared weights, then self-attention across the concatenated themes.
namespace themescreen::tcl {

using numeric::Matrix;
using numeric::Param;

enum class Stage { kStage1, kStage2 };

struct AttentionParams {
  Param wq;
  Param wk;
  Param wv;
  Stage owner = Stage::kStage1;

  // Entries uniform in ±1/√d.
  static AttentionParams init(std::size_t d, Stage owner, Rng& rng);
  static AttentionParams zeros(std::size_t d, Stage owner);

  std::size_t dim() const { return wq.value.rows(); }
  std::array<Param*, 3> params() { return {&wq, &wk, &wv}; }
  void zero_grad();
};

// softmax_rows((X·Wq)(X·Wk)ᵀ / √d).
Matrix correlation_matrix(const Matrix& x, const AttentionParams& p);

// Forward intermediates kept for the backward pass and for export.
struct AttentionTrace {
  Matrix x;
  Matrix q;
  Matrix k;
  Matrix v;
  Matrix a;    // L×L attention
  Matrix out;  // A·X·Wv
};

AttentionTrace correlate_traced(const Matrix& x, const AttentionParams& p);
Matrix correlate(const Matrix& x, const AttentionParams& p);

// Adds dWq, dWk, dWv into p's gradients and returns dX.
Matrix correlate_backward(const AttentionTrace& trace, AttentionParams& p, const Matrix& dout);

struct Stage1Output {
  std::vector<AttentionTrace> themes;
};

struct Stage2Output {
  AttentionTrace trace;                  // over the concatenated sequence
  std::vector<std::size_t> boundaries;  // theme segments of trace.out
};

Stage1Output stage1(std::span<const Matrix> themes, const AttentionParams& p);
Stage2Output stage2(const Stage1Output& s1, const AttentionParams& p);
std::vector<Matrix> resplit(const Stage2Output& s2);

// Block average of a cross-theme attention map: entry (i, j) is the attention
// mass a token of segment i places on segment j, averaged over segment i.
// Rows sum to 1.
Matrix theme_affinity(const Matrix& attention, std::span<const std::size_t> boundaries);

// Result of a full TCL pass over the active themes.
struct CorrelationTrace {
  bool bypassed = false;
  Stage1Output s1;
  Stage2Output s2;
  std::vector<Matrix> per_theme;  // stage-2 output per theme (raw inputs when bypassed)
};

// The two parameter sets plus the ablation switch. With tcl disabled there are
// no parameters and the per-theme outputs are the embeddings themselves.
class ThemeCorrelator {
 public:
  ThemeCorrelator() = default;
  ThemeCorrelator(std::size_t d, bool enabled, Rng& rng);
  ThemeCorrelator(AttentionParams stage1, AttentionParams stage2);

  bool enabled() const { return enabled_; }
  std::size_t dim() const { return d_; }

  CorrelationTrace forward(std::span<const Matrix> themes) const;
  // d_per_theme are gradients w.r.t. CorrelationTrace::per_theme. Accumulates
  // parameter gradients; returns gradients w.r.t. the inputs.
  std::vector<Matrix> backward(const CorrelationTrace& trace, std::span<const Matrix> d_per_theme);

  std::vector<Param*> params();
  AttentionParams& stage1_params() { return stage1_; }
  AttentionParams& stage2_params() { return stage2_; }
  const AttentionParams& stage1_params() const { return stage1_; }
  const AttentionParams& stage2_params() const { return stage2_; }

 private:
  bool enabled_ = false;
  std::size_t d_ = 0;
  AttentionParams stage1_;
  AttentionParams stage2_;
};

}  // namespace themescreen::tcl
