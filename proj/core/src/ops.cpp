#include "themescreen/numeric/ops.hpp"

#include <algorithm>
#include <cmath>

#include "themescreen/errors.hpp"

namespace themescreen::numeric {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_mismatch(op, a, b);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto brow = b.row(k);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < arow.size(); ++i) {
      const double aki = arow[i];
      auto out = c.row(i);
      for (std::size_t j = 0; j < brow.size(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  }
  return t;
}

MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc) {
  if (a.cols() != b.rows()) shape_mismatch("matmul_backward", a, b);
  if (dc.rows() != a.rows() || dc.cols() != b.cols()) shape_mismatch("matmul_backward(dC)", dc, b);
  return {matmul_nt(dc, b), matmul_tn(a, dc)};
}

Matrix softmax_rows(const Matrix& m) {
  Matrix y(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto in = m.row(i);
    auto out = y.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = std::exp(in[j] - mx);
      sum += out[j];
    }
    for (double& v : out) v /= sum;
  }
  return y;
}

Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy) {
  require_same_shape("softmax_rows_backward", y, dy);
  Matrix dx(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto yr = y.row(i);
    auto dyr = dy.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < yr.size(); ++j) dot += dyr[j] * yr[j];
    auto out = dx.row(i);
    for (std::size_t j = 0; j < yr.size(); ++j) out[j] = yr[j] * (dyr[j] - dot);
  }
  return dx;
}

Matrix mean_pool_rows(const Matrix& m) {
  Matrix out(1, m.cols());
  auto o = out.row(0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) o[j] += r[j];
  }
  const double inv = 1.0 / static_cast<double>(m.rows());
  for (double& v : o) v *= inv;
  return out;
}

Matrix mean_pool_rows_backward(const Matrix& dy, std::size_t rows) {
  if (dy.rows() != 1) throw ShapeError("mean_pool_rows_backward: dY must be 1xd, got " + dy.shape_string());
  Matrix dx(rows, dy.cols());
  const double inv = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    auto r = dx.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = dy(0, j) * inv;
  }
  return dx;
}

RowConcat concat_rows(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  RowConcat out;
  out.boundaries.push_back(0);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_mismatch("concat_rows", parts.front(), p);
    rows += p.rows();
    out.boundaries.push_back(rows);
  }
  out.values = Matrix(rows, cols);
  auto dst = out.values.values();
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), dst.begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.size();
  }
  return out;
}

std::vector<Matrix> split_rows(const Matrix& m, std::span<const std::size_t> boundaries) {
  if (boundaries.size() < 2 || boundaries.front() != 0 || boundaries.back() != m.rows()) {
    throw ShapeError("split_rows: boundaries do not span the " + m.shape_string() + " matrix");
  }
  std::vector<Matrix> parts;
  parts.reserve(boundaries.size() - 1);
  for (std::size_t s = 0; s + 1 < boundaries.size(); ++s) {
    if (boundaries[s + 1] <= boundaries[s]) {
      throw ShapeError("split_rows: boundaries must be strictly increasing");
    }
    const std::size_t rows = boundaries[s + 1] - boundaries[s];
    auto src = m.values().subspan(boundaries[s] * m.cols(), rows * m.cols());
    Matrix part(rows, m.cols());
    std::copy(src.begin(), src.end(), part.values().begin());
    parts.push_back(std::move(part));
  }
  return parts;
}

void add_inplace(Matrix& acc, const Matrix& m) { axpy_inplace(acc, 1.0, m); }

void axpy_inplace(Matrix& acc, double alpha, const Matrix& m) {
  require_same_shape("axpy", acc, m);
  auto a = acc.values();
  auto b = m.values();
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += alpha * b[i];
}

Matrix scaled(const Matrix& m, double alpha) {
  Matrix out = m;
  for (double& v : out.values()) v *= alpha;
  return out;
}

}  // namespace themescreen::numeric
