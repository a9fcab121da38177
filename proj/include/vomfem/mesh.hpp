#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace vomfem {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
double distance(Point2 a, Point2 b);

using Cell = std::array<std::size_t, 3>;
using Edge = std::pair<std::size_t, std::size_t>;

/// Barycentric coordinates below -kContainmentTolerance place a point outside a cell.
inline constexpr double kContainmentTolerance = 1e-12;

/// (1 - xi - eta, xi, eta) for reference coordinates (xi, eta).
std::array<double, 3> barycentric(Point2 ref);
bool inside_reference_triangle(Point2 ref, double tolerance = kContainmentTolerance);

/// Affine map from the reference triangle {(0,0), (1,0), (0,1)} onto a cell.
struct CellGeometry {
  std::size_t cell = 0;
  Point2 origin;
  /// Column-major [dx/dxi, dy/dxi, dx/deta, dy/deta].
  std::array<double, 4> jacobian{};
  double determinant = 0.0;

  Point2 to_physical(Point2 ref) const;
  /// Throws GeometryError for a degenerate cell.
  Point2 to_reference(Point2 point) const;
  /// Maps a reference-coordinate gradient to physical coordinates (J^{-T} g).
  std::array<double, 2> physical_gradient(std::array<double, 2> ref_gradient) const;
};

/// Conforming triangulation of the rectangle [0, Lx] x [0, Ly]. Immutable.
class TriangleMesh {
 public:
  /// Validates orientation, edge manifoldness and area coverage.
  TriangleMesh(std::vector<Point2> vertices, std::vector<Cell> cells, std::pair<double, double> extent);

  std::span<const Point2> vertices() const { return vertices_; }
  std::span<const Cell> cells() const { return cells_; }
  std::span<const Edge> boundary_edges() const { return boundary_edges_; }
  std::pair<double, double> extent() const { return extent_; }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_cells() const { return cells_.size(); }

  const Cell& cell(std::size_t index) const;
  /// Signed area (positive for counter-clockwise cells).
  double cell_area(std::size_t index) const;
  CellGeometry geometry(std::size_t index) const;
  std::vector<std::size_t> boundary_vertices() const;
  /// Smallest edge length of a cell, used to size point-location bins.
  double typical_spacing() const { return spacing_; }

 private:
  std::vector<Point2> vertices_;
  std::vector<Cell> cells_;
  std::vector<Edge> boundary_edges_;
  std::pair<double, double> extent_;
  double spacing_ = 0.0;
};

double signed_area(Point2 a, Point2 b, Point2 c);

/// Structured mesh, each grid square split along its lower-left to
/// upper-right diagonal.
TriangleMesh build_rectangle_mesh(std::size_t nx, std::size_t ny, double lx, double ly);

Point2 reference_to_physical(const TriangleMesh& mesh, std::size_t cell, Point2 ref);
Point2 physical_to_reference(const TriangleMesh& mesh, std::size_t cell, Point2 point);

/// Legacy ASCII VTK unstructured grid. Optional point data is written as one
/// SCALARS block per entry.
struct VtkPointData {
  std::string name;
  std::span<const double> values;
};
void write_vtk(std::ostream& out, const TriangleMesh& mesh,
               std::span<const VtkPointData> point_data = {}, const std::string& title = "vomfem");
TriangleMesh read_vtk(std::istream& in);

}  // namespace vomfem
