#pragma once

// Point evaluation as interpolation into P0DG on a vertex-only mesh. The
// operator is stored as a sparse matrix: row i holds the parent basis
// functions of X_i's cell evaluated at X_i's reference coordinates.

#include <span>

#include "vomfem/fem.hpp"
#include "vomfem/linalg.hpp"
#include "vomfem/vom.hpp"

namespace vomfem {

class PointInterpolator {
 public:
  PointInterpolator(FunctionSpacePtr space, VertexOnlyMeshPtr vom);

  const FunctionSpace& space() const { return *space_; }
  const VertexOnlyMesh& vom() const { return *vom_; }
  const VertexOnlyMeshPtr& vom_ptr() const { return vom_; }
  const linalg::SparseMatrix& matrix() const { return matrix_; }
  std::size_t num_points() const { return matrix_.rows(); }

  P0DGField apply(const Field& u) const;
  linalg::Vector apply(std::span<const double> coefficients) const;
  /// Transpose action: point-indexed values to a dof-space vector.
  linalg::Vector apply_adjoint(std::span<const double> point_values) const;
  linalg::Vector apply_adjoint(const P0DGField& y) const;

 private:
  FunctionSpacePtr space_;
  VertexOnlyMeshPtr vom_;
  linalg::SparseMatrix matrix_;
};

PointInterpolator build_point_interpolator(FunctionSpacePtr space, VertexOnlyMeshPtr vom);

/// Right-hand side of sum_i w_i delta(x - X_i): the adjoint of point evaluation.
linalg::Vector delta_load(FunctionSpacePtr space, VertexOnlyMeshPtr vom,
                          std::span<const double> weights);

}  // namespace vomfem
