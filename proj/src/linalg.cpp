#include "vomfem/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "vomfem/errors.hpp"

namespace vomfem::linalg {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
    throw InvalidArgument("inconsistent compressed-row layout");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) throw InvalidArgument("row offsets not monotone");
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] >= cols_) throw InvalidArgument("column index out of range");
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw InvalidArgument("column indices must be sorted and unique within a row");
      }
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets) {
    if (t.row >= rows || t.col >= cols) throw InvalidArgument("triplet index out of range");
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> columns;
  std::vector<double> values;
  columns.reserve(triplets.size());
  values.reserve(triplets.size());
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
      values.back() += t.value;
      continue;
    }
    columns.push_back(t.col);
    values.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(columns), std::move(values));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> columns(n);
  for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
  for (std::size_t i = 0; i < n; ++i) columns[i] = i;
  return SparseMatrix(n, n, std::move(offsets), std::move(columns), Vector(n, 1.0));
}

std::span<const std::size_t> SparseMatrix::row_columns(std::size_t row) const {
  return std::span<const std::size_t>(col_indices_).subspan(
      row_offsets_[row], row_offsets_[row + 1] - row_offsets_[row]);
}

std::span<const double> SparseMatrix::row_values(std::size_t row) const {
  return std::span<const double>(values_).subspan(row_offsets_[row],
                                                  row_offsets_[row + 1] - row_offsets_[row]);
}

std::span<double> SparseMatrix::row_values(std::size_t row) {
  return std::span<double>(values_).subspan(row_offsets_[row],
                                            row_offsets_[row + 1] - row_offsets_[row]);
}

std::size_t SparseMatrix::position(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_) throw InvalidArgument("matrix index out of range");
  const auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row]);
  const auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[row + 1]);
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) {
    throw InvalidArgument("entry (" + std::to_string(row) + ", " + std::to_string(col) +
                          ") is not in the sparsity pattern");
  }
  return static_cast<std::size_t>(it - col_indices_.begin());
}

double SparseMatrix::at(std::size_t row, std::size_t col) const {
  if (row >= rows_ || col >= cols_) throw InvalidArgument("matrix index out of range");
  const auto columns = row_columns(row);
  const auto it = std::lower_bound(columns.begin(), columns.end(), col);
  if (it == columns.end() || *it != col) return 0.0;
  return values_[row_offsets_[row] + static_cast<std::size_t>(it - columns.begin())];
}

Vector SparseMatrix::diagonal() const {
  Vector d(std::min(rows_, cols_), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r) d[r] = at(r, r);
  return d;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<std::size_t> offsets(cols_ + 1, 0);
  for (auto c : col_indices_) ++offsets[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) offsets[c + 1] += offsets[c];
  std::vector<std::size_t> columns(nnz());
  Vector values(nnz());
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const auto slot = cursor[col_indices_[k]]++;
      columns[slot] = r;
      values[slot] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(offsets), std::move(columns), std::move(values));
}

double SparseMatrix::asymmetry() const {
  if (rows_ != cols_) throw InvalidArgument("asymmetry of a non-square matrix");
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      worst = std::max(worst, std::abs(values_[k] - at(col_indices_[k], r)));
    }
  }
  return worst;
}

void SparseMatrix::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
  if (x.size() != a.cols() || y.size() != a.rows()) throw InvalidArgument("spmv shape mismatch");
  const auto offsets = a.row_offsets();
  const auto columns = a.col_indices();
  const auto values = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) sum += values[k] * x[columns[k]];
    y[r] = sum;
  }
}

Vector spmv(const SparseMatrix& a, std::span<const double> x) {
  Vector y(a.rows());
  spmv(a, x, y);
  return y;
}

Vector spmv_transpose(const SparseMatrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw InvalidArgument("spmv_transpose shape mismatch");
  Vector y(a.cols(), 0.0);
  const auto offsets = a.row_offsets();
  const auto columns = a.col_indices();
  const auto values = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) y[columns[k]] += values[k] * x[r];
  }
  return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("dot product length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw InvalidArgument("axpy length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

SolveReport cg_solve(const SparseMatrix& a, std::span<const double> b, std::span<double> x,
                     const CgOptions& options) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n || x.size() != n) throw InvalidArgument("cg shape mismatch");
  for (double v : b) {
    if (!std::isfinite(v)) throw InvalidArgument("cg right-hand side is not finite");
  }
  if (options.check_symmetry && !a.is_symmetric(1e-12)) {
    throw SolverError("conjugate gradient requires a symmetric matrix");
  }
  std::fill(x.begin(), x.end(), 0.0);

  SolveReport report;
  const double b_norm = norm2(b);
  if (b_norm == 0.0) {
    report.converged = true;
    return report;
  }

  Vector inv_diag = a.diagonal();
  for (auto& d : inv_diag) {
    if (d <= 0.0) throw SolverError("non-positive diagonal entry; matrix is not SPD");
    d = 1.0 / d;
  }

  const std::size_t max_iterations = options.max_iterations ? options.max_iterations : 10 * n;
  Vector r(n), z(n), p(n), ap(n);
  // The recurrence residual drifts from the true one, so convergence is
  // confirmed against b - A x and the iteration restarted if needed.
  for (int restart = 0; restart < 4; ++restart) {
    spmv(a, x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    report.relative_residual = norm2(r) / b_norm;
    report.converged = report.relative_residual <= options.tolerance;
    if (report.converged || report.iterations >= max_iterations) break;

    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    while (report.iterations < max_iterations) {
      spmv(a, p, ap);
      const double curvature = dot(p, ap);
      if (!(curvature > 0.0)) {
        throw SolverError("conjugate gradient breakdown: p^T A p = " + std::to_string(curvature));
      }
      const double step = rz / curvature;
      axpy(step, p, x);
      axpy(-step, ap, r);
      ++report.iterations;
      if (norm2(r) <= options.tolerance * b_norm) break;
      for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
      const double rz_next = dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
  }
  return report;
}

std::pair<Vector, SolveReport> cg_solve(const SparseMatrix& a, std::span<const double> b,
                                        const CgOptions& options) {
  Vector x(a.rows(), 0.0);
  auto report = cg_solve(a, b, x, options);
  return {std::move(x), report};
}

void write_matrix_market(std::ostream& out, const SparseMatrix& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  char buffer[64];
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto columns = a.row_columns(r);
    const auto values = a.row_values(r);
    for (std::size_t k = 0; k < columns.size(); ++k) {
      std::snprintf(buffer, sizeof buffer, "%.17g", values[k]);
      out << r + 1 << ' ' << columns[k] + 1 << ' ' << buffer << '\n';
    }
  }
}

struct CholeskyFactor::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  std::size_t n = 0;
};

CholeskyFactor::CholeskyFactor(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  if (a.rows() != a.cols()) throw InvalidArgument("cholesky factor needs a square matrix");
  impl_->n = a.rows();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(a.nnz());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto cols = a.row_columns(r);
    const auto vals = a.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      entries.emplace_back(static_cast<int>(r), static_cast<int>(cols[k]), vals[k]);
    }
  }
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()));
  m.setFromTriplets(entries.begin(), entries.end());
  impl_->ldlt.compute(m);
  if (impl_->ldlt.info() != Eigen::Success || (impl_->ldlt.vectorD().array() <= 0.0).any()) {
    throw SolverError("sparse factorization failed: matrix is not positive definite");
  }
}

CholeskyFactor::~CholeskyFactor() = default;
CholeskyFactor::CholeskyFactor(CholeskyFactor&&) noexcept = default;
CholeskyFactor& CholeskyFactor::operator=(CholeskyFactor&&) noexcept = default;

std::size_t CholeskyFactor::size() const { return impl_->n; }

void CholeskyFactor::solve(std::span<const double> b, std::span<double> x) const {
  if (b.size() != impl_->n || x.size() != impl_->n) throw InvalidArgument("cholesky solve shape mismatch");
  const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), static_cast<Eigen::Index>(b.size()));
  Eigen::Map<Eigen::VectorXd> out(x.data(), static_cast<Eigen::Index>(x.size()));
  out = impl_->ldlt.solve(rhs);
}

}  // namespace vomfem::linalg
