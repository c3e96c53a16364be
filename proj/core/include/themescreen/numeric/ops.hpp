#pragma once

#include <span>
#include <vector>

#include "themescreen/numeric/matrix.hpp"

// Forward kernels and their explicit reverse-mode counterparts. Callers compose
// backward passes by hand; nothing here records a tape.
namespace themescreen::numeric {

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T and a^T * b without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

struct MatmulGrads {
  Matrix da;
  Matrix db;
};
// Given dC for C = A*B: dA = dC*B^T, dB = A^T*dC.
MatmulGrads matmul_backward(const Matrix& a, const Matrix& b, const Matrix& dc);

Matrix softmax_rows(const Matrix& m);
// y is the softmax output; returns y ⊙ (dy − rowdot(dy, y)).
Matrix softmax_rows_backward(const Matrix& y, const Matrix& dy);

// Column means as a 1×cols matrix.
Matrix mean_pool_rows(const Matrix& m);
Matrix mean_pool_rows_backward(const Matrix& dy, std::size_t rows);

struct RowConcat {
  Matrix values;
  std::vector<std::size_t> boundaries;  // offsets, front() == 0, back() == rows
};
RowConcat concat_rows(std::span<const Matrix> parts);
// Inverse of concat_rows. Throws ShapeError on boundaries that do not tile m.
std::vector<Matrix> split_rows(const Matrix& m, std::span<const std::size_t> boundaries);

void add_inplace(Matrix& acc, const Matrix& m);
void axpy_inplace(Matrix& acc, double alpha, const Matrix& m);
Matrix scaled(const Matrix& m, double alpha);

}  // namespace themescreen::numeric
