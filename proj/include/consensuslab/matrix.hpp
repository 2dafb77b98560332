#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace consensuslab {

/// Dense real matrix, row-major. Sized for the problems in this library
/// (certificate matrices up to a few hundred rows), not for HPC work.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0);

  static Matrix identity(int m);
  static Matrix diagonal(const std::vector<double>& d);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const;
  std::vector<double> row(int i) const;
  std::vector<double> col(int j) const;

  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double s);

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }
  Matrix operator-() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend std::vector<double> operator*(const Matrix& a, const std::vector<double>& v);

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// max-norm (largest absolute entry)
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

bool is_symmetric(const Matrix& m, double tol = 1e-12);

/// (M + M^T)/2
Matrix symmetrize(const Matrix& m);

/// x^T M y
double quadratic_form(const Matrix& m, const std::vector<double>& x,
                      const std::vector<double>& y);

struct SymEigen {
  std::vector<double> values;  // ascending
  Matrix vectors;              // orthonormal columns, vectors.col(i) <-> values[i]
};

/// Symmetric eigendecomposition by cyclic Jacobi sweeps. Throws
/// std::invalid_argument on non-symmetric input and std::runtime_error
/// (with sweep count and residual) if the off-diagonal mass fails to
/// converge.
SymEigen sym_eigen(const Matrix& m);

/// Kronecker product A (x) B.
Matrix kron(const Matrix& a, const Matrix& b);

/// exp(M) for symmetric M via eigendecomposition. Throws std::overflow_error
/// when an eigenvalue exceeds the representable exponent range.
Matrix sym_expm(const Matrix& m);

/// min_i |lambda_i(M)|. Only symmetric inputs are supported; pass
/// symmetrize=true to replace M by (M+M^T)/2 first.
double min_abs_eig(const Matrix& m, bool symmetrize_first = false);

/// max_i |lambda_i(M)| for symmetric M.
double max_abs_eig(const Matrix& m);

/// 2-norm (largest singular value), via eigenvalues of M^T M.
double spectral_norm(const Matrix& m);

double lambda_min(const Matrix& sym);
double lambda_max(const Matrix& sym);

std::string to_string(const Matrix& m);

}  // namespace consensuslab
