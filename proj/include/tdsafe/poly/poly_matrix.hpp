#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tdsafe/poly/polynomial.hpp"

namespace tdsafe::poly {

template <class C>
class BasicPolyMatrix {
 public:
  using Poly = BasicPolynomial<C>;

  BasicPolyMatrix(SpacePtr space, int rows, int cols)
      : space_(std::move(space)), rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, Poly(space_)) {
    if (rows < 0 || cols < 0) throw ShapeError("negative matrix dimension");
  }

  static BasicPolyMatrix identity(SpacePtr space, int n) {
    BasicPolyMatrix m(space, n, n);
    for (int i = 0; i < n; ++i) m(i, i) = Poly::constant(space, CoeffOps<C>::one());
    return m;
  }

  static BasicPolyMatrix from_numeric(SpacePtr space, const Eigen::MatrixXd& a) {
    BasicPolyMatrix m(space, static_cast<int>(a.rows()), static_cast<int>(a.cols()));
    for (int i = 0; i < m.rows_; ++i) {
      for (int j = 0; j < m.cols_; ++j) m(i, j) = Poly::constant(space, C(a(i, j)));
    }
    return m;
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  const SpacePtr& space() const noexcept { return space_; }

  Poly& operator()(int i, int j) { return data_.at(static_cast<std::size_t>(i) * cols_ + j); }
  const Poly& operator()(int i, int j) const {
    return data_.at(static_cast<std::size_t>(i) * cols_ + j);
  }

  BasicPolyMatrix transpose() const {
    BasicPolyMatrix t(space_, cols_, rows_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    }
    return t;
  }

  BasicPolyMatrix& operator+=(const BasicPolyMatrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  BasicPolyMatrix& operator-=(const BasicPolyMatrix& o) {
    check_shape(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  BasicPolyMatrix& operator*=(double s) {
    for (auto& p : data_) p *= s;
    return *this;
  }
  friend BasicPolyMatrix operator+(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a += b; }
  friend BasicPolyMatrix operator-(BasicPolyMatrix a, const BasicPolyMatrix& b) { return a -= b; }
  friend BasicPolyMatrix operator*(BasicPolyMatrix a, double s) { return a *= s; }
  friend BasicPolyMatrix operator*(double s, BasicPolyMatrix a) { return a *= s; }

  friend BasicPolyMatrix operator*(const BasicPolyMatrix& a, const BasicPolyMatrix& b) {
    if (a.cols_ != b.rows_) {
      throw ShapeError("matrix product " + std::to_string(a.rows_) + "x" + std::to_string(a.cols_) +
                       " * " + std::to_string(b.rows_) + "x" + std::to_string(b.cols_));
    }
    BasicPolyMatrix r(a.space_, a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i) {
      for (int j = 0; j < b.cols_; ++j) {
        for (int k = 0; k < a.cols_; ++k) {
          if (a(i, k).is_zero() || b(k, j).is_zero()) continue;
          r(i, j) += a(i, k) * b(k, j);
        }
      }
    }
    return r;
  }

  int max_degree() const {
    int d = 0;
    for (const auto& p : data_) d = std::max(d, p.degree());
    return d;
  }

  bool is_constant() const {
    for (const auto& p : data_) {
      if (p.degree() > 0) return false;
    }
    return true;
  }

  template <class F>
  auto map_entries(F&& f) const {
    using D = typename std::decay_t<decltype(f(std::declval<const Poly&>()))>::Coeff;
    BasicPolyMatrix<D> r(space_, rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) r(i, j) = f((*this)(i, j));
    }
    return r;
  }

  // Stack blocks; every row of `blocks` must have matching heights.
  static BasicPolyMatrix blocks(const std::vector<std::vector<BasicPolyMatrix>>& b) {
    if (b.empty() || b[0].empty()) throw ShapeError("empty block matrix");
    SpacePtr sp = b[0][0].space();
    int rows = 0, cols = 0;
    for (const auto& m : b[0]) cols += m.cols();
    for (const auto& row : b) {
      int c = 0;
      for (const auto& m : row) {
        if (m.rows() != row[0].rows()) throw ShapeError("block heights differ");
        c += m.cols();
      }
      if (c != cols) throw ShapeError("block widths differ");
      rows += row[0].rows();
    }
    BasicPolyMatrix r(sp, rows, cols);
    int r0 = 0;
    for (const auto& row : b) {
      int c0 = 0;
      for (const auto& m : row) {
        for (int i = 0; i < m.rows(); ++i) {
          for (int j = 0; j < m.cols(); ++j) r(r0 + i, c0 + j) = m(i, j);
        }
        c0 += m.cols();
      }
      r0 += row[0].rows();
    }
    return r;
  }

  void check_shape(const BasicPolyMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw ShapeError("matrix shapes differ");
  }

 private:
  SpacePtr space_;
  int rows_;
  int cols_;
  std::vector<Poly> data_;
};

using PolyMatrix = BasicPolyMatrix<double>;

Eigen::MatrixXd evaluate(const PolyMatrix& m, std::span<const double> point);
Eigen::MatrixXd to_numeric(const PolyMatrix& m);  // throws unless constant

template <class C>
BasicPolyMatrix<C> lift(const PolyMatrix& m) {
  return m.map_entries([](const Polynomial& p) { return lift<C>(p); });
}

// Column vector of polynomials.
template <class C>
BasicPolyMatrix<C> column(const std::vector<BasicPolynomial<C>>& entries) {
  if (entries.empty()) throw ShapeError("empty column");
  BasicPolyMatrix<C> m(entries[0].space(), static_cast<int>(entries.size()), 1);
  for (std::size_t i = 0; i < entries.size(); ++i) m(static_cast<int>(i), 0) = entries[i];
  return m;
}

// Column of the variables of a group, e.g. (x1, ..., xn)^T.
template <class C>
BasicPolyMatrix<C> group_vector(const SpacePtr& space, const std::string& group) {
  const auto& g = space->group(group);
  BasicPolyMatrix<C> m(space, g.dim, 1);
  for (int k = 0; k < g.dim; ++k) m(k, 0) = BasicPolynomial<C>::variable(space, g.offset + k);
  return m;
}

}  // namespace tdsafe::poly
