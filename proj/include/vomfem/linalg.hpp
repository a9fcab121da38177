#pragma once

// Compressed-row sparse matrices and a Jacobi-preconditioned conjugate
// gradient solver.

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace vomfem::linalg {

using Vector = std::vector<double>;

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

class SparseMatrix {
 public:
  SparseMatrix() = default;

  /// Validates the layout: offsets monotone, columns sorted, unique and in range.
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_offsets,
               std::vector<std::size_t> col_indices, std::vector<double> values);

  /// Duplicate entries are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> col_indices() const { return col_indices_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  std::span<const std::size_t> row_columns(std::size_t row) const;
  std::span<const double> row_values(std::size_t row) const;
  std::span<double> row_values(std::size_t row);

  /// Zero when (row, col) is not stored.
  double at(std::size_t row, std::size_t col) const;
  /// Position of (row, col) in values(); throws if the entry is not in the pattern.
  std::size_t position(std::size_t row, std::size_t col) const;
  void add(std::size_t row, std::size_t col, double value) { values_[position(row, col)] += value; }

  Vector diagonal() const;
  SparseMatrix transpose() const;
  /// max |a_ij - a_ji|
  double asymmetry() const;
  bool is_symmetric(double tol) const { return asymmetry() <= tol; }
  void set_zero();

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
};

Vector spmv(const SparseMatrix& a, std::span<const double> x);
Vector spmv_transpose(const SparseMatrix& a, std::span<const double> x);
void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

struct SolveReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

struct CgOptions {
  double tolerance = 1e-10;
  /// 0 selects 10 * n.
  std::size_t max_iterations = 0;
  bool check_symmetry = false;
};

/// Solves A x = b starting from x = 0. Throws SolverError on breakdown
/// (p^T A p <= 0) or, when requested, on an asymmetric matrix. Non-convergence
/// is reported, not thrown.
SolveReport cg_solve(const SparseMatrix& a, std::span<const double> b, std::span<double> x,
                     const CgOptions& options = {});
std::pair<Vector, SolveReport> cg_solve(const SparseMatrix& a, std::span<const double> b,
                                        const CgOptions& options = {});

/// Sparse LDL^T factorization of a symmetric positive definite matrix, kept
/// for repeated solves with the same operator. Throws SolverError when the
/// matrix is not positive definite.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const SparseMatrix& a);
  ~CholeskyFactor();
  CholeskyFactor(CholeskyFactor&&) noexcept;
  CholeskyFactor& operator=(CholeskyFactor&&) noexcept;

  std::size_t size() const;
  void solve(std::span<const double> b, std::span<double> x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Coordinate-format Matrix Market, 1-based indices.
void write_matrix_market(std::ostream& out, const SparseMatrix& a);

}  // namespace vomfem::linalg
