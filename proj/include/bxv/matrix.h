// include/bxv/matrix.h

// Copyright 2026  The bxv authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "bxv/rng.h"

namespace bxv {

/// Dense row-major matrix of doubles.  All training and verification paths
/// run in 64-bit precision; public operations keep entries finite and throw
/// otherwise.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

std::string shape_str(const Matrix& m);

// Products.  matmul_nt(a, b) = a * b^T; matmul_tn(a, b) = a^T * b.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);
void add_scaled_inplace(Matrix& dst, const Matrix& src, double s);

double max_abs(const Matrix& a);
double frob_norm(const Matrix& a);
double trace(const Matrix& a);
bool all_finite(const Matrix& a);
void ensure_finite(const Matrix& a, std::string_view what);
bool is_symmetric(const Matrix& a, double tol = 1e-9);

/// Symmetric eigendecomposition via cyclic Jacobi rotations.
/// values are sorted descending; vectors holds the matching eigenvectors
/// as columns, so a * vectors = vectors * diag(values).
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};
SymEig sym_eig(const Matrix& a);

/// Cholesky factor L (lower) with a * x = b solvers.  Throws on a
/// non-positive pivot.
Matrix cholesky_lower(const Matrix& a);
Matrix solve_lower(const Matrix& l, const Matrix& b);            // L x = b
Matrix solve_lower_transposed(const Matrix& l, const Matrix& b); // L^T x = b
Matrix solve_spd(const Matrix& a, const Matrix& b);
double spd_logdet_from_cholesky(const Matrix& l);

/// rows x cols matrix of i.i.d. standard normal draws from the stream.
Matrix gaussian_sample(RngStream& rng, std::size_t rows, std::size_t cols);

}  // namespace bxv
