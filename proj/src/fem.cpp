#include "vomfem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "vomfem/errors.hpp"

namespace vomfem {

ReferenceElement::ReferenceElement(ElementFamily family) : family_(family) {
  switch (family) {
    case ElementFamily::LagrangeP1Triangle:
      nodes_ = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
      break;
    case ElementFamily::LagrangeP2Triangle:
      nodes_ = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.5, 0.5}, {0.0, 0.5}, {0.5, 0.0}};
      break;
    case ElementFamily::DG0Vertex:
      nodes_ = {{0.0, 0.0}};
      break;
  }
}

int ReferenceElement::degree() const {
  switch (family_) {
    case ElementFamily::LagrangeP1Triangle: return 1;
    case ElementFamily::LagrangeP2Triangle: return 2;
    case ElementFamily::DG0Vertex: return 0;
  }
  return 0;
}

std::string ReferenceElement::name() const {
  switch (family_) {
    case ElementFamily::LagrangeP1Triangle: return "P1";
    case ElementFamily::LagrangeP2Triangle: return "P2";
    case ElementFamily::DG0Vertex: return "P0DG";
  }
  return "?";
}

Tabulation ReferenceElement::tabulate(Point2 ref) const {
  Tabulation t;
  t.count = basis_count();
  const double l0 = 1.0 - ref.x - ref.y;
  const double l1 = ref.x;
  const double l2 = ref.y;
  // Reference gradients of the barycentric coordinates.
  constexpr std::array<double, 2> g0{-1.0, -1.0};
  constexpr std::array<double, 2> g1{1.0, 0.0};
  constexpr std::array<double, 2> g2{0.0, 1.0};
  switch (family_) {
    case ElementFamily::LagrangeP1Triangle:
      t.values = {l0, l1, l2};
      t.gradients = {g0, g1, g2};
      break;
    case ElementFamily::LagrangeP2Triangle: {
      const std::array<double, 3> l{l0, l1, l2};
      const std::array<std::array<double, 2>, 3> g{g0, g1, g2};
      for (int i = 0; i < 3; ++i) {
        t.values[i] = l[i] * (2.0 * l[i] - 1.0);
        for (int d = 0; d < 2; ++d) t.gradients[i][d] = (4.0 * l[i] - 1.0) * g[i][d];
      }
      constexpr std::array<std::array<int, 2>, 3> edges{{{1, 2}, {0, 2}, {0, 1}}};
      for (int e = 0; e < 3; ++e) {
        const int a = edges[e][0];
        const int b = edges[e][1];
        t.values[3 + e] = 4.0 * l[a] * l[b];
        for (int d = 0; d < 2; ++d) {
          t.gradients[3 + e][d] = 4.0 * (g[a][d] * l[b] + l[a] * g[b][d]);
        }
      }
      break;
    }
    case ElementFamily::DG0Vertex:
      t.values[0] = 1.0;
      break;
  }
  return t;
}

Tabulation tabulate_basis(const ReferenceElement& element, Point2 ref) {
  return element.tabulate(ref);
}

const QuadratureRule& triangle_quadrature() {
  static const QuadratureRule rule = [] {
    constexpr double a = 0.44594849091596488631832925388305;
    constexpr double wa = 0.22338158967801146569500700843312;
    constexpr double b = 0.091576213509770743459571463402202;
    constexpr double wb = 0.10995174365532186763832632490021;
    QuadratureRule r;
    r.degree = 4;
    r.points = {{a, a}, {1.0 - 2.0 * a, a}, {a, 1.0 - 2.0 * a},
                {b, b}, {1.0 - 2.0 * b, b}, {b, 1.0 - 2.0 * b}};
    r.weights = {0.5 * wa, 0.5 * wa, 0.5 * wa, 0.5 * wb, 0.5 * wb, 0.5 * wb};
    return r;
  }();
  return rule;
}

FunctionSpace::FunctionSpace(MeshPtr mesh, ElementFamily family)
    : mesh_(std::move(mesh)), element_(family) {
  if (!mesh_) throw InvalidArgument("function space needs a mesh");
  if (family == ElementFamily::DG0Vertex) {
    throw InvalidArgument("vertex elements live on vertex-only meshes, not triangle meshes");
  }
  const auto& m = *mesh_;
  const std::size_t nv = m.num_vertices();
  const std::size_t k = element_.basis_count();
  dof_coordinates_.assign(m.vertices().begin(), m.vertices().end());
  on_boundary_.assign(nv, false);
  for (const auto& [a, b] : m.boundary_edges()) {
    on_boundary_[a] = true;
    on_boundary_[b] = true;
  }
  dofmap_.resize(m.num_cells() * k);

  std::vector<Edge> edges;
  if (family == ElementFamily::LagrangeP2Triangle) {
    for (const auto& c : m.cells()) {
      for (int e = 0; e < 3; ++e) {
        const auto a = c[(e + 1) % 3];
        const auto b = c[(e + 2) % 3];
        edges.push_back({std::min(a, b), std::max(a, b)});
      }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    std::vector<Edge> boundary(m.boundary_edges().begin(), m.boundary_edges().end());
    for (const auto& edge : edges) {
      const auto pa = m.vertices()[edge.first];
      const auto pb = m.vertices()[edge.second];
      dof_coordinates_.push_back(0.5 * (pa + pb));
      on_boundary_.push_back(std::binary_search(boundary.begin(), boundary.end(), edge));
    }
  }
  const auto edge_dof = [&](std::size_t a, std::size_t b) {
    const Edge key{std::min(a, b), std::max(a, b)};
    return nv + static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), key) -
                                         edges.begin());
  };

  std::vector<linalg::Triplet> pattern;
  pattern.reserve(m.num_cells() * k * k);
  for (std::size_t c = 0; c < m.num_cells(); ++c) {
    const auto& cell = m.cell(c);
    auto* dofs = &dofmap_[c * k];
    dofs[0] = cell[0];
    dofs[1] = cell[1];
    dofs[2] = cell[2];
    if (k == 6) {
      dofs[3] = edge_dof(cell[1], cell[2]);
      dofs[4] = edge_dof(cell[0], cell[2]);
      dofs[5] = edge_dof(cell[0], cell[1]);
    }
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) pattern.push_back({dofs[i], dofs[j], 0.0});
    }
  }
  pattern_ = linalg::SparseMatrix::from_triplets(ndofs(), ndofs(), std::move(pattern));
}

std::span<const std::size_t> FunctionSpace::cell_dofs(std::size_t cell) const {
  const std::size_t k = dofs_per_cell();
  if (cell >= mesh_->num_cells()) throw InvalidArgument("cell index out of range");
  return std::span<const std::size_t>(dofmap_).subspan(cell * k, k);
}

std::vector<std::size_t> FunctionSpace::boundary_dofs() const {
  return boundary_dofs([](Point2) { return true; });
}

std::vector<std::size_t> FunctionSpace::boundary_dofs(const std::function<bool(Point2)>& where) const {
  std::vector<std::size_t> result;
  for (std::size_t i = 0; i < ndofs(); ++i) {
    if (on_boundary_[i] && where(dof_coordinates_[i])) result.push_back(i);
  }
  return result;
}

FunctionSpacePtr make_function_space(MeshPtr mesh, ElementFamily family) {
  return std::make_shared<const FunctionSpace>(std::move(mesh), family);
}

Field::Field(FunctionSpacePtr space) : space_(std::move(space)) {
  if (!space_) throw InvalidArgument("field needs a function space");
  coefficients_.assign(space_->ndofs(), 0.0);
}

Field::Field(FunctionSpacePtr space, std::vector<double> coefficients)
    : space_(std::move(space)), coefficients_(std::move(coefficients)) {
  if (!space_) throw InvalidArgument("field needs a function space");
  if (coefficients_.size() != space_->ndofs()) {
    throw InvalidArgument("coefficient count does not match the space dimension");
  }
}

double Field::evaluate_in_cell(std::size_t cell, Point2 ref) const {
  const auto dofs = space_->cell_dofs(cell);
  const auto t = space_->element().tabulate(ref);
  double value = 0.0;
  for (std::size_t i = 0; i < t.count; ++i) value += coefficients_[dofs[i]] * t.values[i];
  return value;
}

std::array<double, 2> Field::gradient_in_cell(std::size_t cell, Point2 ref) const {
  const auto dofs = space_->cell_dofs(cell);
  const auto t = space_->element().tabulate(ref);
  std::array<double, 2> g{0.0, 0.0};
  for (std::size_t i = 0; i < t.count; ++i) {
    g[0] += coefficients_[dofs[i]] * t.gradients[i][0];
    g[1] += coefficients_[dofs[i]] * t.gradients[i][1];
  }
  return space_->mesh().geometry(cell).physical_gradient(g);
}

double Field::evaluate(Point2 point) const {
  const auto& mesh = space_->mesh();
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto ref = mesh.geometry(c).to_reference(point);
    if (inside_reference_triangle(ref)) return evaluate_in_cell(c, ref);
  }
  throw PointNotFound(0, point.x, point.y);
}

Field interpolate_callable(FunctionSpacePtr space, const PointFunction& g) {
  std::vector<double> w;
  w.reserve(space->ndofs());
  for (const auto& x : space->dof_coordinates()) w.push_back(g(x));
  return Field(std::move(space), std::move(w));
}

CellQuadrature cell_quadrature(const FunctionSpace& space, std::size_t cell) {
  const auto& rule = triangle_quadrature();
  const auto geometry = space.mesh().geometry(cell);
  const double jacobian = std::abs(geometry.determinant);
  CellQuadrature q;
  for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
    q.points[p] = geometry.to_physical(rule.points[p]);
    q.weights[p] = rule.weights[p] * jacobian;
    const auto t = space.element().tabulate(rule.points[p]);
    for (std::size_t i = 0; i < t.count; ++i) {
      q.values[p][i] = t.values[i];
      q.gradients[p][i] = geometry.physical_gradient(t.gradients[i]);
    }
  }
  return q;
}

std::vector<double> evaluate_at_quadrature(const Field& field) {
  const auto& space = field.space();
  const auto& rule = triangle_quadrature();
  std::array<Tabulation, CellQuadrature::kPoints> tab;
  for (std::size_t p = 0; p < tab.size(); ++p) tab[p] = space.element().tabulate(rule.points[p]);
  const auto w = field.coefficients();
  std::vector<double> out(space.mesh().num_cells() * CellQuadrature::kPoints);
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto dofs = space.cell_dofs(c);
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      double value = 0.0;
      for (std::size_t i = 0; i < dofs.size(); ++i) value += w[dofs[i]] * tab[p].values[i];
      out[c * CellQuadrature::kPoints + p] = value;
    }
  }
  return out;
}

std::vector<double> evaluate_at_quadrature(const TriangleMesh& mesh, const PointFunction& g) {
  const auto& rule = triangle_quadrature();
  std::vector<double> out(mesh.num_cells() * CellQuadrature::kPoints);
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
    const auto geometry = mesh.geometry(c);
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      out[c * CellQuadrature::kPoints + p] = g(geometry.to_physical(rule.points[p]));
    }
  }
  return out;
}

namespace {

void check_quadrature_length(const FunctionSpace& space, std::span<const double> values) {
  if (values.size() != space.mesh().num_cells() * CellQuadrature::kPoints) {
    throw InvalidArgument("quadrature values do not match the mesh");
  }
}

template <typename CellPredicate>
linalg::SparseMatrix stiffness_kernel(const FunctionSpace& space, std::span<const double> k,
                                      CellPredicate include) {
  linalg::SparseMatrix a = space.sparsity();
  const std::size_t n = space.dofs_per_cell();
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    if (!include(c)) continue;
    const auto q = cell_quadrature(space, c);
    const auto dofs = space.cell_dofs(c);
    std::array<std::array<double, kMaxBasis>, kMaxBasis> local{};
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      const double scale = q.weights[p] * (k.empty() ? 1.0 : k[c * CellQuadrature::kPoints + p]);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          local[i][j] += scale * (q.gradients[p][i][0] * q.gradients[p][j][0] +
                                  q.gradients[p][i][1] * q.gradients[p][j][1]);
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a.add(dofs[i], dofs[j], local[i][j]);
    }
  }
  return a;
}

}  // namespace

linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space,
                                                 std::span<const double> k_at_quadrature) {
  check_quadrature_length(space, k_at_quadrature);
  for (std::size_t i = 0; i < k_at_quadrature.size(); ++i) {
    if (!(k_at_quadrature[i] > 0.0)) {
      throw ModelingError("non-positive coefficient " + std::to_string(k_at_quadrature[i]) +
                          " in cell " + std::to_string(i / CellQuadrature::kPoints));
    }
  }
  return stiffness_kernel(space, k_at_quadrature, [](std::size_t) { return true; });
}

linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space, const Field& k) {
  if (&k.space().mesh() != &space.mesh()) throw InvalidArgument("coefficient lives on another mesh");
  return assemble_weighted_stiffness(space, evaluate_at_quadrature(k));
}

linalg::SparseMatrix assemble_weighted_stiffness(const FunctionSpace& space, const PointFunction& k) {
  return assemble_weighted_stiffness(space, evaluate_at_quadrature(space.mesh(), k));
}

linalg::SparseMatrix assemble_stiffness(const FunctionSpace& space) {
  return stiffness_kernel(space, {}, [](std::size_t) { return true; });
}

linalg::SparseMatrix assemble_stiffness_on_cells(const FunctionSpace& space,
                                                 std::span<const std::size_t> cells) {
  std::vector<bool> mask(space.mesh().num_cells(), false);
  for (auto c : cells) {
    if (c >= mask.size()) throw InvalidArgument("cell index out of range");
    mask[c] = true;
  }
  return stiffness_kernel(space, {}, [&mask](std::size_t c) { return mask[c]; });
}

linalg::SparseMatrix assemble_mass(const FunctionSpace& space) {
  linalg::SparseMatrix m = space.sparsity();
  const std::size_t n = space.dofs_per_cell();
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto q = cell_quadrature(space, c);
    const auto dofs = space.cell_dofs(c);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double sum = 0.0;
        for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
          sum += q.weights[p] * q.values[p][i] * q.values[p][j];
        }
        m.add(dofs[i], dofs[j], sum);
      }
    }
  }
  return m;
}

linalg::Vector assemble_load(const FunctionSpace& space, std::span<const double> f_at_quadrature) {
  check_quadrature_length(space, f_at_quadrature);
  linalg::Vector b(space.ndofs(), 0.0);
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto q = cell_quadrature(space, c);
    const auto dofs = space.cell_dofs(c);
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      const double scale = q.weights[p] * f_at_quadrature[c * CellQuadrature::kPoints + p];
      for (std::size_t i = 0; i < dofs.size(); ++i) b[dofs[i]] += scale * q.values[p][i];
    }
  }
  return b;
}

linalg::Vector assemble_load(const FunctionSpace& space, const Field& f) {
  if (&f.space().mesh() != &space.mesh()) throw InvalidArgument("load lives on another mesh");
  return assemble_load(space, evaluate_at_quadrature(f));
}

linalg::Vector assemble_load(const FunctionSpace& space, const PointFunction& f) {
  return assemble_load(space, evaluate_at_quadrature(space.mesh(), f));
}

void apply_dirichlet(linalg::SparseMatrix& a, linalg::Vector& b, std::span<const std::size_t> dofs,
                     double value) {
  const std::vector<double> values(dofs.size(), value);
  apply_dirichlet(a, b, dofs, values);
}

void apply_dirichlet(linalg::SparseMatrix& a, linalg::Vector& b, std::span<const std::size_t> dofs,
                     std::span<const double> values) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.size() != n) throw InvalidArgument("dirichlet: system shape mismatch");
  if (dofs.size() != values.size()) throw InvalidArgument("dirichlet: one value per dof required");
  std::vector<bool> constrained(n, false);
  std::vector<double> g(n, 0.0);
  for (std::size_t k = 0; k < dofs.size(); ++k) {
    if (dofs[k] >= n) {
      throw InvalidArgument("dirichlet dof " + std::to_string(dofs[k]) + " out of range");
    }
    constrained[dofs[k]] = true;
    g[dofs[k]] = values[k];
  }
  for (std::size_t r = 0; r < n; ++r) {
    const auto columns = a.row_columns(r);
    auto row = a.row_values(r);
    if (constrained[r]) {
      for (std::size_t k = 0; k < columns.size(); ++k) row[k] = columns[k] == r ? 1.0 : 0.0;
      b[r] = g[r];
      continue;
    }
    for (std::size_t k = 0; k < columns.size(); ++k) {
      if (constrained[columns[k]]) {
        b[r] -= row[k] * g[columns[k]];
        row[k] = 0.0;
      }
    }
  }
}

namespace {

double quadratic_form(const linalg::SparseMatrix& a, std::span<const double> w) {
  const auto aw = linalg::spmv(a, w);
  return linalg::dot(w, aw);
}

}  // namespace

double norm_L2(const Field& u) {
  return std::sqrt(std::max(0.0, quadratic_form(assemble_mass(u.space()), u.coefficients())));
}

double norm_H1_semi(const Field& u) {
  return std::sqrt(std::max(0.0, quadratic_form(assemble_stiffness(u.space()), u.coefficients())));
}

double error_L2(const Field& u, const PointFunction& exact) {
  const auto& space = u.space();
  const auto w = u.coefficients();
  double sum = 0.0;
  for (std::size_t c = 0; c < space.mesh().num_cells(); ++c) {
    const auto q = cell_quadrature(space, c);
    const auto dofs = space.cell_dofs(c);
    for (std::size_t p = 0; p < CellQuadrature::kPoints; ++p) {
      double uh = 0.0;
      for (std::size_t i = 0; i < dofs.size(); ++i) uh += w[dofs[i]] * q.values[p][i];
      const double diff = uh - exact(q.points[p]);
      sum += q.weights[p] * diff * diff;
    }
  }
  return std::sqrt(sum);
}

void write_fields_vtk(std::ostream& out, std::span<const Field* const> fields,
                      std::span<const std::string> names) {
  if (fields.empty()) throw InvalidArgument("no fields to write");
  if (fields.size() != names.size()) throw InvalidArgument("one name per field required");
  const auto& mesh = fields.front()->space().mesh();
  std::vector<VtkPointData> data;
  for (std::size_t f = 0; f < fields.size(); ++f) {
    if (&fields[f]->space().mesh() != &mesh) throw InvalidArgument("fields on different meshes");
    data.push_back({names[f], fields[f]->coefficients().first(mesh.num_vertices())});
  }
  write_vtk(out, mesh, data);
}

void write_coefficients_csv(std::ostream& out, const Field& u) {
  char buffer[128];
  out << "dof,x,y,value\n";
  const auto coords = u.space().dof_coordinates();
  for (std::size_t i = 0; i < u.size(); ++i) {
    std::snprintf(buffer, sizeof buffer, "%zu,%.17g,%.17g,%.17g\n", i, coords[i].x, coords[i].y,
                  u.coefficients()[i]);
    out << buffer;
  }
}

}  // namespace vomfem
