#pragma once

// Lagrange reference elements, function spaces over triangle meshes, and the
// quadrature-based assembly of mass, stiffness and load terms.

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vomfem/linalg.hpp"
#include "vomfem/mesh.hpp"

namespace vomfem {

enum class ElementFamily { LagrangeP1Triangle, LagrangeP2Triangle, DG0Vertex };

inline constexpr std::size_t kMaxBasis = 6;

struct Tabulation {
  std::size_t count = 0;
  std::array<double, kMaxBasis> values{};
  /// Gradients with respect to reference coordinates.
  std::array<std::array<double, 2>, kMaxBasis> gradients{};
};

/// Nodal Lagrange element. Vertices come first, then edge midpoints in the
/// order (v1, v2), (v0, v2), (v0, v1).
class ReferenceElement {
 public:
  explicit ReferenceElement(ElementFamily family);

  ElementFamily family() const { return family_; }
  std::size_t basis_count() const { return nodes_.size(); }
  int degree() const;
  std::span<const Point2> nodes() const { return nodes_; }
  std::string name() const;

  Tabulation tabulate(Point2 ref) const;

 private:
  ElementFamily family_;
  std::vector<Point2> nodes_;
};

struct QuadratureRule {
  std::vector<Point2> points;
  std::vector<double> weights;
  int degree = 0;
};

/// Symmetric 6-point rule on the reference triangle, exact to degree 4.
const QuadratureRule& triangle_quadrature();

class FunctionSpace;
using FunctionSpacePtr = std::shared_ptr<const FunctionSpace>;
using MeshPtr = std::shared_ptr<const TriangleMesh>;

/// Continuous Lagrange space with global dof numbering: vertex dofs in mesh
/// order, then one dof per edge with edges sorted by (low, high) endpoint.
class FunctionSpace {
 public:
  FunctionSpace(MeshPtr mesh, ElementFamily family);

  const TriangleMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const ReferenceElement& element() const { return element_; }
  std::size_t ndofs() const { return dof_coordinates_.size(); }
  std::size_t dofs_per_cell() const { return element_.basis_count(); }
  std::span<const std::size_t> cell_dofs(std::size_t cell) const;
  std::span<const Point2> dof_coordinates() const { return dof_coordinates_; }

  /// Dofs lying on boundary edges.
  std::vector<std::size_t> boundary_dofs() const;
  /// Boundary dofs whose coordinate satisfies the predicate.
  std::vector<std::size_t> boundary_dofs(const std::function<bool(Point2)>& where) const;

  /// Zero-valued matrix holding the cell-coupling pattern.
  const linalg::SparseMatrix& sparsity() const { return pattern_; }

 private:
  MeshPtr mesh_;
  ReferenceElement element_;
  std::vector<std::size_t> dofmap_;
  std::vector<Point2> dof_coordinates_;
  std::vector<bool> on_boundary_;
  linalg::SparseMatrix pattern_;
};

FunctionSpacePtr make_function_space(MeshPtr mesh, ElementFamily family);

/// Finite element field u(x) = sum_i w_i phi_i(x).
class Field {
 public:
  explicit Field(FunctionSpacePtr space);
  Field(FunctionSpacePtr space, std::vector<double> coefficients);

  const FunctionSpace& space() const { return *space_; }
  const FunctionSpacePtr& space_ptr() const { return space_; }
  std::span<const double> coefficients() const { return coefficients_; }
  std::span<double> coefficients() { return coefficients_; }
  std::size_t size() const { return coefficients_.size(); }

  double evaluate_in_cell(std::size_t cell, Point2 ref) const;
  std::array<double, 2> gradient_in_cell(std::size_t cell, Point2 ref) const;
  /// Evaluates at a physical point by scanning all cells (lowest containing
  /// cell wins). Meant for checks, not inner loops.
  double evaluate(Point2 point) const;

 private:
  FunctionSpacePtr space_;
  std::vector<double> coefficients_;
};

using PointFunction = std::function<double(Point2)>;

Tabulation tabulate_basis(const ReferenceElement& element, Point2 ref);
Field interpolate_callable(FunctionSpacePtr space, const PointFunction& g);

/// Per-cell quadrature data: physical points, weights scaled by |det J|, and
/// basis values / physical gradients at every quadrature point.
struct CellQuadrature {
  static constexpr std::size_t kPoints = 6;
  std::array<Point2, kPoints> points{};
  std::array<double, kPoints> weights{};
  std::array<std::array<double, kMaxBasis>, kPoints> values{};
  std::array<std::array<std::array<double, 2>, kMaxBasis>, kPoints> gradients{};
};

CellQuadrature cell_quadrature(const FunctionSpace& space, std::size_t cell);

/// Coefficient values at every quadrature point, indexed cell * 6 + point.
std::vector<double> evaluate_at_quadrature(const Field& field);
std::vector<double> evaluate_at_quadrature(const TriangleMesh& mesh, const PointFunction& g);

/// int k grad(phi_i) . grad(phi_j). Throws ModelingError if k <= 0 at a quadrature point.
linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space,
                                                 std::span<const double> k_at_quadrature);
linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space, const Field& k);
linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space, const PointFunction& k);
/// Unit-coefficient stiffness.
linalg::SparseMatrix assemble_stiffness(const FunctionSpace& space);
/// Unit-coefficient stiffness restricted to a subset of cells.
linalg::SparseMatrix assemble_stiffness_on_cells(const FunctionSpace& space,
                                                 std::span<const std::size_t> cells);
linalg::SparseMatrix assemble_mass(const FunctionSpace& space);

linalg::Vector assemble_load(const FunctionSpace& space, std::span<const double> f_at_quadrature);
linalg::Vector assemble_load(const FunctionSpace& space, const Field& f);
linalg::Vector assemble_load(const FunctionSpace& space, const PointFunction& f);

/// Symmetric elimination: constrained rows and columns become identity rows,
/// the right-hand side is lifted and constrained entries set to the value.
void apply_dirichlet(linalg::SparseMatrix& a, linalg::Vector& b,
                     std::span<const std::size_t> dofs, double value);
void apply_dirichlet(linalg::SparseMatrix& a, linalg::Vector& b,
                     std::span<const std::size_t> dofs, std::span<const double> values);

double norm_L2(const Field& u);
double norm_H1_semi(const Field& u);
/// sqrt(int (u_h - g)^2) by quadrature.
double error_L2(const Field& u, const PointFunction& exact);

/// VTK dump of P1/P2 fields by their vertex values.
void write_fields_vtk(std::ostream& out, std::span<const Field* const> fields,
                      std::span<const std::string> names);
/// Full coefficient sidecar: dof,x,y,value.
void write_coefficients_csv(std::ostream& out, const Field& u);

}  // namespace vomfem
