#include "vomfem/pointeval.hpp"

#include <algorithm>
#include <numeric>

#include "vomfem/errors.hpp"

namespace vomfem {

PointInterpolator::PointInterpolator(FunctionSpacePtr space, VertexOnlyMeshPtr vom)
    : space_(std::move(space)), vom_(std::move(vom)) {
  if (!space_ || !vom_) throw InvalidArgument("interpolator needs a space and a vertex-only mesh");
  if (vom_->parent_ptr().get() != &space_->mesh()) {
    throw InvalidArgument("vertex-only mesh is not immersed in the function space's mesh");
  }
  const std::size_t k = space_->dofs_per_cell();
  const std::size_t n = vom_->size();
  std::vector<std::size_t> offsets(n + 1);
  std::vector<std::size_t> columns(n * k);
  std::vector<double> values(n * k);
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i + 1] = (i + 1) * k;
    const auto dofs = space_->cell_dofs(vom_->parent_cell(i));
    const auto t = space_->element().tabulate(vom_->ref_coords(i));
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&dofs](std::size_t a, std::size_t b) { return dofs[a] < dofs[b]; });
    for (std::size_t j = 0; j < k; ++j) {
      columns[i * k + j] = dofs[order[j]];
      values[i * k + j] = t.values[order[j]];
    }
  }
  matrix_ = linalg::SparseMatrix(n, space_->ndofs(), std::move(offsets), std::move(columns),
                                 std::move(values));
}

P0DGField PointInterpolator::apply(const Field& u) const {
  if (&u.space().mesh() != &space_->mesh() ||
      u.space().element().family() != space_->element().family()) {
    throw InvalidArgument("field is not in the interpolator's source space");
  }
  return P0DGField(vom_, apply(u.coefficients()));
}

linalg::Vector PointInterpolator::apply(std::span<const double> coefficients) const {
  if (coefficients.size() != matrix_.cols()) throw InvalidArgument("interpolation dimension mismatch");
  return linalg::spmv(matrix_, coefficients);
}

linalg::Vector PointInterpolator::apply_adjoint(std::span<const double> point_values) const {
  if (point_values.size() != matrix_.rows()) throw InvalidArgument("adjoint dimension mismatch");
  return linalg::spmv_transpose(matrix_, point_values);
}

linalg::Vector PointInterpolator::apply_adjoint(const P0DGField& y) const {
  return apply_adjoint(y.values());
}

PointInterpolator build_point_interpolator(FunctionSpacePtr space, VertexOnlyMeshPtr vom) {
  return PointInterpolator(std::move(space), std::move(vom));
}

linalg::Vector delta_load(FunctionSpacePtr space, VertexOnlyMeshPtr vom,
                          std::span<const double> weights) {
  return build_point_interpolator(std::move(space), std::move(vom)).apply_adjoint(weights);
}

}  // namespace vomfem
