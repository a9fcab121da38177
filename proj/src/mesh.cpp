#include "vomfem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "vomfem/errors.hpp"

namespace vomfem {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::array<double, 3> barycentric(Point2 ref) { return {1.0 - ref.x - ref.y, ref.x, ref.y}; }

bool inside_reference_triangle(Point2 ref, double tolerance) {
  const auto l = barycentric(ref);
  return l[0] >= -tolerance && l[1] >= -tolerance && l[2] >= -tolerance;
}

double signed_area(Point2 a, Point2 b, Point2 c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

Point2 CellGeometry::to_physical(Point2 ref) const {
  return {origin.x + jacobian[0] * ref.x + jacobian[2] * ref.y,
          origin.y + jacobian[1] * ref.x + jacobian[3] * ref.y};
}

Point2 CellGeometry::to_reference(Point2 point) const {
  if (determinant == 0.0 || !std::isfinite(determinant)) {
    throw GeometryError("cell " + std::to_string(cell) + " is degenerate");
  }
  const double dx = point.x - origin.x;
  const double dy = point.y - origin.y;
  return {(jacobian[3] * dx - jacobian[2] * dy) / determinant,
          (-jacobian[1] * dx + jacobian[0] * dy) / determinant};
}

std::array<double, 2> CellGeometry::physical_gradient(std::array<double, 2> g) const {
  // J^{-T} g with J = [[j0, j2], [j1, j3]].
  return {(jacobian[3] * g[0] - jacobian[1] * g[1]) / determinant,
          (-jacobian[2] * g[0] + jacobian[0] * g[1]) / determinant};
}

TriangleMesh::TriangleMesh(std::vector<Point2> vertices, std::vector<Cell> cells,
                           std::pair<double, double> extent)
    : vertices_(std::move(vertices)), cells_(std::move(cells)), extent_(extent) {
  if (cells_.empty()) throw InvalidArgument("mesh has no cells");
  if (!(extent_.first > 0.0) || !(extent_.second > 0.0)) {
    throw InvalidArgument("mesh extent must be positive");
  }
  std::map<Edge, int> edge_count;
  double total_area = 0.0;
  spacing_ = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cells_.size(); ++c) {
    const auto& cell = cells_[c];
    for (auto v : cell) {
      if (v >= vertices_.size()) throw InvalidArgument("cell references a missing vertex");
    }
    const double area = signed_area(vertices_[cell[0]], vertices_[cell[1]], vertices_[cell[2]]);
    if (!(area > 0.0)) {
      throw GeometryError("cell " + std::to_string(c) + " has non-positive signed area");
    }
    total_area += area;
    for (int k = 0; k < 3; ++k) {
      const auto a = cell[k];
      const auto b = cell[(k + 1) % 3];
      ++edge_count[{std::min(a, b), std::max(a, b)}];
      spacing_ = std::min(spacing_, distance(vertices_[a], vertices_[b]));
    }
  }
  for (const auto& [edge, count] : edge_count) {
    if (count > 2) throw GeometryError("edge shared by more than two cells");
    if (count == 1) boundary_edges_.push_back(edge);
  }
  const double expected = extent_.first * extent_.second;
  if (std::abs(total_area - expected) > 1e-12 * expected) {
    throw GeometryError("cells do not tile the rectangle");
  }
}

const Cell& TriangleMesh::cell(std::size_t index) const {
  if (index >= cells_.size()) {
    throw InvalidArgument("cell index " + std::to_string(index) + " out of range");
  }
  return cells_[index];
}

double TriangleMesh::cell_area(std::size_t index) const {
  const auto& c = cell(index);
  return signed_area(vertices_[c[0]], vertices_[c[1]], vertices_[c[2]]);
}

CellGeometry TriangleMesh::geometry(std::size_t index) const {
  const auto& c = cell(index);
  const Point2 p0 = vertices_[c[0]];
  const Point2 p1 = vertices_[c[1]];
  const Point2 p2 = vertices_[c[2]];
  CellGeometry g;
  g.cell = index;
  g.origin = p0;
  g.jacobian = {p1.x - p0.x, p1.y - p0.y, p2.x - p0.x, p2.y - p0.y};
  g.determinant = g.jacobian[0] * g.jacobian[3] - g.jacobian[2] * g.jacobian[1];
  return g;
}

std::vector<std::size_t> TriangleMesh::boundary_vertices() const {
  std::vector<std::size_t> result;
  for (const auto& [a, b] : boundary_edges_) {
    result.push_back(a);
    result.push_back(b);
  }
  std::sort(result.begin(), result.end());
  result.erase(std::unique(result.begin(), result.end()), result.end());
  return result;
}

TriangleMesh build_rectangle_mesh(std::size_t nx, std::size_t ny, double lx, double ly) {
  if (nx < 1 || ny < 1) throw InvalidArgument("rectangle mesh needs at least one cell per axis");
  if (!(lx > 0.0) || !(ly > 0.0)) throw InvalidArgument("rectangle dimensions must be positive");
  std::vector<Point2> vertices;
  vertices.reserve((nx + 1) * (ny + 1));
  for (std::size_t j = 0; j <= ny; ++j) {
    // Exact end coordinates so boundary tests need no tolerance.
    const double y = j == ny ? ly : ly * static_cast<double>(j) / static_cast<double>(ny);
    for (std::size_t i = 0; i <= nx; ++i) {
      const double x = i == nx ? lx : lx * static_cast<double>(i) / static_cast<double>(nx);
      vertices.push_back({x, y});
    }
  }
  std::vector<Cell> cells;
  cells.reserve(2 * nx * ny);
  const auto index = [nx](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const auto v00 = index(i, j);
      const auto v10 = index(i + 1, j);
      const auto v01 = index(i, j + 1);
      const auto v11 = index(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  }
  return TriangleMesh(std::move(vertices), std::move(cells), {lx, ly});
}

Point2 reference_to_physical(const TriangleMesh& mesh, std::size_t cell, Point2 ref) {
  return mesh.geometry(cell).to_physical(ref);
}

Point2 physical_to_reference(const TriangleMesh& mesh, std::size_t cell, Point2 point) {
  return mesh.geometry(cell).to_reference(point);
}

void write_vtk(std::ostream& out, const TriangleMesh& mesh, std::span<const VtkPointData> point_data,
               const std::string& title) {
  char buffer[96];
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices()) {
    std::snprintf(buffer, sizeof buffer, "%.17g %.17g 0\n", v.x, v.y);
    out << buffer;
  }
  out << "CELLS " << mesh.num_cells() << ' ' << 4 * mesh.num_cells() << '\n';
  for (const auto& c : mesh.cells()) out << "3 " << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (std::size_t c = 0; c < mesh.num_cells(); ++c) out << "5\n";
  if (point_data.empty()) return;
  out << "POINT_DATA " << mesh.num_vertices() << '\n';
  for (const auto& data : point_data) {
    if (data.values.size() != mesh.num_vertices()) {
      throw InvalidArgument("point data '" + data.name + "' has the wrong length");
    }
    out << "SCALARS " << data.name << " double 1\nLOOKUP_TABLE default\n";
    for (double value : data.values) {
      std::snprintf(buffer, sizeof buffer, "%.17g\n", value);
      out << buffer;
    }
  }
}

namespace {

std::string expect_keyword(std::istream& in, const std::string& keyword) {
  std::string token;
  if (!(in >> token) || token != keyword) {
    throw InvalidArgument("VTK parse error: expected " + keyword + ", got '" + token + "'");
  }
  return token;
}

}  // namespace

TriangleMesh read_vtk(std::istream& in) {
  std::string line;
  for (int i = 0; i < 4 && std::getline(in, line); ++i) {
    if (i == 2 && line.rfind("ASCII", 0) != 0) throw InvalidArgument("only ASCII VTK is supported");
  }
  expect_keyword(in, "POINTS");
  std::size_t n_points = 0;
  std::string type;
  in >> n_points >> type;
  std::vector<Point2> vertices(n_points);
  double max_x = 0.0;
  double max_y = 0.0;
  for (auto& v : vertices) {
    double z = 0.0;
    if (!(in >> v.x >> v.y >> z)) throw InvalidArgument("VTK parse error in POINTS");
    max_x = std::max(max_x, v.x);
    max_y = std::max(max_y, v.y);
  }
  expect_keyword(in, "CELLS");
  std::size_t n_cells = 0;
  std::size_t n_entries = 0;
  in >> n_cells >> n_entries;
  std::vector<Cell> cells(n_cells);
  for (auto& c : cells) {
    std::size_t count = 0;
    if (!(in >> count) || count != 3 || !(in >> c[0] >> c[1] >> c[2])) {
      throw InvalidArgument("VTK parse error: only triangle cells are supported");
    }
  }
  return TriangleMesh(std::move(vertices), std::move(cells), {max_x, max_y});
}

}  // namespace vomfem
