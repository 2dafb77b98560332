#include "consensuslab/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace consensuslab {

Matrix::Matrix(int rows, int cols, double fill)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("Matrix: negative dimension");
}

Matrix Matrix::identity(int m) {
  Matrix r(m, m);
  for (int i = 0; i < m; ++i) r(i, i) = 1.0;
  return r;
}

Matrix Matrix::diagonal(const std::vector<double>& d) {
  Matrix r(static_cast<int>(d.size()), static_cast<int>(d.size()));
  for (int i = 0; i < r.rows(); ++i) r(i, i) = d[i];
  return r;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix r(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < r.rows(); ++i) {
    if (static_cast<int>(rows[i].size()) != r.cols())
      throw std::invalid_argument("Matrix::from_rows: ragged rows");
    for (int j = 0; j < r.cols(); ++j) r(i, j) = rows[i][j];
  }
  return r;
}

Matrix Matrix::transpose() const {
  Matrix r(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) r(j, i) = (*this)(i, j);
  return r;
}

std::vector<double> Matrix::row(int i) const {
  std::vector<double> r(cols_);
  for (int j = 0; j < cols_; ++j) r[j] = (*this)(i, j);
  return r;
}

std::vector<double> Matrix::col(int j) const {
  std::vector<double> r(rows_);
  for (int i = 0; i < rows_; ++i) r[i] = (*this)(i, j);
  return r;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (!same_shape(o)) throw std::invalid_argument("Matrix+: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (!same_shape(o)) throw std::invalid_argument("Matrix-: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Matrix& Matrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

Matrix Matrix::operator-() const {
  Matrix r = *this;
  return r *= -1.0;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("Matrix*: shape mismatch");
  Matrix r(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
    }
  }
  return r;
}

std::vector<double> operator*(const Matrix& a, const std::vector<double>& v) {
  if (a.cols() != static_cast<int>(v.size()))
    throw std::invalid_argument("Matrix*vec: shape mismatch");
  std::vector<double> r(a.rows(), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

double max_abs(const Matrix& m) {
  double r = 0.0;
  for (double v : m.data()) r = std::max(r, std::abs(v));
  return r;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double r = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) r = std::max(r, std::abs(a(i, j) - b(i, j)));
  return r;
}

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + max_abs(m);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * scale) return false;
  return true;
}

Matrix symmetrize(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetrize: not square");
  Matrix r(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) r(i, j) = 0.5 * (m(i, j) + m(j, i));
  return r;
}

double quadratic_form(const Matrix& m, const std::vector<double>& x,
                      const std::vector<double>& y) {
  const std::vector<double> my = m * y;
  return std::inner_product(x.begin(), x.end(), my.begin(), 0.0);
}

SymEigen sym_eigen(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("sym_eigen: not square");
  if (!is_symmetric(m, 1e-12))
    throw std::invalid_argument("sym_eigen: input is not symmetric within 1e-12");

  const int n = m.rows();
  Matrix a = symmetrize(m);  // scrub rounding-level asymmetry
  Matrix v = Matrix::identity(n);

  auto off = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  const double scale = max_abs(a);
  const double tol = (scale > 0 ? scale : 1.0) * 1e-15 * n;
  const int max_sweeps = 100;
  int sweep = 0;
  for (; sweep < max_sweeps && off() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= tol / (10.0 * n)) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off() > tol) {
    throw std::runtime_error("sym_eigen: Jacobi failed to converge after " +
                             std::to_string(sweep) + " sweeps (off-diagonal " +
                             std::to_string(off()) + ", tol " + std::to_string(tol) + ")");
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, i) < a(j, j); });

  SymEigen r;
  r.values.resize(n);
  r.vectors = Matrix(n, n);
  for (int c = 0; c < n; ++c) {
    const int src = order[c];
    r.values[c] = a(src, src);
    // fix sign: largest-magnitude component positive, for reproducible output
    int imax = 0;
    for (int i = 1; i < n; ++i)
      if (std::abs(v(i, src)) > std::abs(v(imax, src))) imax = i;
    const double sgn = v(imax, src) < 0 ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i) r.vectors(i, c) = sgn * v(i, src);
  }
  return r;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix r(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (int p = 0; p < b.rows(); ++p)
        for (int q = 0; q < b.cols(); ++q)
          r(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
    }
  return r;
}

Matrix sym_expm(const Matrix& m) {
  const SymEigen e = sym_eigen(m);
  for (double lam : e.values)
    if (lam > 709.0)
      throw std::overflow_error("sym_expm: eigenvalue " + std::to_string(lam) +
                                " exceeds exp() range");
  const int n = m.rows();
  Matrix r(n, n);
  for (int c = 0; c < n; ++c) {
    const double w = std::exp(e.values[c]);
    for (int i = 0; i < n; ++i) {
      const double wi = w * e.vectors(i, c);
      for (int j = 0; j < n; ++j) r(i, j) += wi * e.vectors(j, c);
    }
  }
  return symmetrize(r);
}

double min_abs_eig(const Matrix& m, bool symmetrize_first) {
  const Matrix s = symmetrize_first ? symmetrize(m) : m;
  const SymEigen e = sym_eigen(s);
  double r = std::abs(e.values[0]);
  for (double lam : e.values) r = std::min(r, std::abs(lam));
  return r;
}

double max_abs_eig(const Matrix& m) {
  const SymEigen e = sym_eigen(m);
  double r = 0.0;
  for (double lam : e.values) r = std::max(r, std::abs(lam));
  return r;
}

double spectral_norm(const Matrix& m) {
  const Matrix mtm = m.transpose() * m;
  const SymEigen e = sym_eigen(mtm);
  return std::sqrt(std::max(0.0, e.values.back()));
}

double lambda_min(const Matrix& sym) { return sym_eigen(sym).values.front(); }
double lambda_max(const Matrix& sym) { return sym_eigen(sym).values.back(); }

std::string to_string(const Matrix& m) {
  std::ostringstream os;
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace consensuslab
