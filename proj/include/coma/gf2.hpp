#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "coma/bitvec.hpp"

namespace coma {
namespace gf2 {

// Outcome of solving a linear system over GF(2).
enum class SolveStatus { unique, underdetermined, inconsistent };

struct SolveResult {
  SolveStatus status;
  BitVec solution;  // valid only when status == unique
};

// Row-reduced solve of A x = b where each row of `rows` is [coefficients | rhs]
// packed as a BitVec of length ncols + 1. Plain Gauss-Jordan; sizes here are
// tiny (ncols <= a few hundred) so no bit-sliced cleverness is needed.
inline SolveResult solve(std::vector<BitVec> rows, std::size_t ncols) {
  std::size_t nrows = rows.size();
  std::vector<std::size_t> pivot_col;
  std::size_t r = 0;
  for (std::size_t c = 0; c < ncols && r < nrows; ++c) {
    std::size_t p = r;
    while (p < nrows && !rows[p].get(c)) ++p;
    if (p == nrows) continue;
    std::swap(rows[p], rows[r]);
    for (std::size_t i = 0; i < nrows; ++i)
      if (i != r && rows[i].get(c)) rows[i] ^= rows[r];
    pivot_col.push_back(c);
    ++r;
  }
  // Any remaining row 0...0 | 1 proves inconsistency.
  for (std::size_t i = r; i < nrows; ++i)
    if (rows[i].get(ncols)) return {SolveStatus::inconsistent, BitVec()};
  if (pivot_col.size() < ncols) return {SolveStatus::underdetermined, BitVec()};
  BitVec x(ncols);
  for (std::size_t i = 0; i < ncols; ++i)
    if (rows[i].get(ncols)) x.set(pivot_col[i], true);
  return {SolveStatus::unique, x};
}

inline std::size_t rank(std::vector<BitVec> rows, std::size_t ncols) {
  std::size_t nrows = rows.size(), r = 0;
  for (std::size_t c = 0; c < ncols && r < nrows; ++c) {
    std::size_t p = r;
    while (p < nrows && !rows[p].get(c)) ++p;
    if (p == nrows) continue;
    std::swap(rows[p], rows[r]);
    for (std::size_t i = r + 1; i < nrows; ++i)
      if (rows[i].get(c)) rows[i] ^= rows[r];
    ++r;
  }
  return r;
}

// Dense n x n bit matrix with row-major BitVec storage.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t nrows, std::size_t ncols)
      : nrows_(nrows), ncols_(ncols), rows_(nrows, BitVec(ncols)) {}

  std::size_t rows() const { return nrows_; }
  std::size_t cols() const { return ncols_; }

  bool get(std::size_t r, std::size_t c) const { return rows_[r].get(c); }
  void set(std::size_t r, std::size_t c, bool v) { rows_[r].set(c, v); }
  const BitVec& row(std::size_t r) const { return rows_[r]; }
  BitVec& row(std::size_t r) { return rows_[r]; }

  // y = M x over GF(2).
  BitVec mul(const BitVec& x) const {
    BitVec y(nrows_);
    for (std::size_t r = 0; r < nrows_; ++r) {
      std::size_t ones = 0;
      for (std::size_t c = 0; c < ncols_; ++c)
        if (rows_[r].get(c) && x.get(c)) ++ones;
      y.set(r, ones & 1);
    }
    return y;
  }

  bool operator==(const Matrix& o) const {
    return nrows_ == o.nrows_ && ncols_ == o.ncols_ && rows_ == o.rows_;
  }

private:
  std::size_t nrows_ = 0, ncols_ = 0;
  std::vector<BitVec> rows_;
};

}  // namespace gf2
}  // namespace coma
